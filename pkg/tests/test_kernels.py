"""Component kernels, the composite kernel, kernel matrices, and log-dets."""

import math

import numpy as np
import pytest

from dkucb.kernels import (
    CompositeKernel,
    Context,
    KernelParams,
    angle_kernel,
    build_kernel_matrix,
    context_kernel,
    distance_kernel,
    doppler_kernel,
    ridge_log_det,
    tx_count_kernel,
)


def random_context(rng, arms=(1, 2, 3, 4)) -> Context:
    return Context(
        arm=int(rng.choice(arms)),
        theta=float(rng.uniform(0, 2 * math.pi)),
        dist=float(rng.uniform(0, 1000)),
        doppler=float(rng.uniform(0, 2500)),
        n_tx=int(rng.integers(0, 20)),
    )


class TestContext:
    def test_theta_normalised_into_range(self):
        assert Context(1, -0.5, 10, 10, 0).theta == pytest.approx(2 * math.pi - 0.5)
        assert Context(1, 7.0, 10, 10, 0).theta == pytest.approx(7.0 - 2 * math.pi)
        assert 0.0 <= Context(1, 123.456, 1, 1, 1).theta < 2 * math.pi

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(arm=1, theta=0.0, dist=-1.0, doppler=0.0, n_tx=0),
            dict(arm=1, theta=0.0, dist=0.0, doppler=-2.0, n_tx=0),
            dict(arm=1, theta=0.0, dist=0.0, doppler=0.0, n_tx=-1),
            dict(arm=1, theta=math.nan, dist=0.0, doppler=0.0, n_tx=0),
        ],
    )
    def test_invalid_fields_rejected(self, kwargs):
        with pytest.raises(ValueError):
            Context(**kwargs)

    def test_feature_vector_order(self):
        x = Context(2, 1.0, 2.0, 3.0, 4)
        assert np.allclose(x.features(), [1.0, 2.0, 3.0, 4.0])


class TestKernelParams:
    def test_defaults_valid(self):
        KernelParams()

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(sigma_dist=0.0),
            dict(sigma_doppler=-1.0),
            dict(sigma_ntx=0.0),
            dict(ridge_lambda=0.0),
            dict(jitter=-1e-9),
        ],
    )
    def test_invalid_rejected(self, kwargs):
        with pytest.raises(ValueError):
            KernelParams(**kwargs)


class TestComponentKernels:
    def test_angle_identity(self):
        assert float(angle_kernel(0.3, 0.3)) == pytest.approx(1.0)

    def test_angle_triangular_profile(self):
        # linear decay over the gap, hitting 0 at pi/2
        assert float(angle_kernel(0.0, math.pi / 3)) == pytest.approx(1.0 / 3.0)
        assert float(angle_kernel(0.0, math.pi / 4)) == pytest.approx(0.5)

    def test_angle_cutoff_beyond_half_pi(self):
        assert float(angle_kernel(0.0, 2.0)) == 0.0
        assert float(angle_kernel(0.0, math.pi / 2)) == 0.0

    def test_angle_wraps_circularly(self):
        # 0.1 rad and 2pi-0.1 rad describe nearly the same direction
        near = float(angle_kernel(0.1, 2 * math.pi - 0.1))
        assert near == pytest.approx(float(angle_kernel(0.1, 0.1 - 0.2)))
        assert near > 0.8

    def test_distance_examples(self):
        assert float(distance_kernel(100.0, 100.0, 50.0)) == pytest.approx(1.0)
        assert float(distance_kernel(100.0, 150.0, 50.0)) == pytest.approx(math.exp(-0.5))
        tail = float(distance_kernel(0.0, 1e6, 50.0))
        assert 0.0 <= tail < 1e-300

    def test_doppler_examples(self):
        assert float(doppler_kernel(500.0, 500.0, 100.0)) == pytest.approx(1.0)
        assert float(doppler_kernel(500.0, 600.0, 100.0)) == pytest.approx(math.exp(-1.0))

    def test_doppler_symmetry(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            a, b = rng.uniform(0, 3000, size=2)
            assert float(doppler_kernel(a, b, 70.0)) == float(doppler_kernel(b, a, 70.0))

    def test_tx_count_examples(self):
        assert float(tx_count_kernel(3, 3, 5.0)) == pytest.approx(1.0)
        assert float(tx_count_kernel(3, 5, 5.0)) == pytest.approx(0.6)
        assert float(tx_count_kernel(0, 7, 5.0)) == 0.0


class TestCompositeKernel:
    def test_cross_arm_is_zero(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            x = random_context(rng, arms=(1,))
            y = random_context(rng, arms=(2,))
            p = KernelParams(
                sigma_dist=float(rng.uniform(1, 500)),
                sigma_doppler=float(rng.uniform(1, 500)),
                sigma_ntx=float(rng.uniform(1, 50)),
            )
            assert context_kernel(x, y, p) == 0.0

    def test_identical_inputs_score_one(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            x = random_context(rng)
            assert context_kernel(x, x, KernelParams()) == pytest.approx(1.0)

    def test_product_of_components(self):
        # recompute the four factors with plain math and multiply
        p = KernelParams(sigma_dist=50.0, sigma_doppler=100.0, sigma_ntx=5.0)
        x = Context(1, 0.0, 100.0, 500.0, 3)
        y = Context(1, math.pi / 4, 150.0, 600.0, 5)
        expected = (
            (1.0 - (math.pi / 4) / (math.pi / 2))
            * math.exp(-(50.0**2) / (2 * 50.0**2))
            * math.exp(-100.0 / 100.0)
            * (1.0 - 2.0 / 5.0)
        )
        assert context_kernel(x, y, p) == pytest.approx(expected, rel=1e-12)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        p = KernelParams()
        for _ in range(100):
            x, y = random_context(rng), random_context(rng)
            assert context_kernel(x, y, p) == context_kernel(y, x, p)

    def test_bounded_zero_one(self):
        rng = np.random.default_rng(6)
        p = KernelParams()
        for _ in range(200):
            v = context_kernel(random_context(rng), random_context(rng), p)
            assert 0.0 <= v <= 1.0

    def test_cross_vector_matches_pairs(self):
        rng = np.random.default_rng(8)
        p = KernelParams()
        kern = CompositeKernel(p)
        samples = [random_context(rng, arms=(2,)) for _ in range(30)]
        q = random_context(rng, arms=(2,))
        feats = np.array([c.features() for c in samples])
        vec = kern.cross_same_arm(feats, q)
        for i, s in enumerate(samples):
            assert vec[i] == pytest.approx(kern.pair(q, s), rel=1e-12)


class TestKernelMatrix:
    def test_empty_set(self):
        km = build_kernel_matrix([], KernelParams())
        assert km.entries.shape == (0, 0)

    def test_singleton_is_one(self):
        x = Context(1, 0.1, 5.0, 5.0, 1)
        km = build_kernel_matrix([x], KernelParams())
        assert km.entries.shape == (1, 1)
        assert km.entries[0, 0] == pytest.approx(1.0)

    def test_symmetric_and_unit_diagonal(self):
        rng = np.random.default_rng(9)
        ctxs = [random_context(rng) for _ in range(20)]
        km = build_kernel_matrix(ctxs, KernelParams())
        assert np.max(np.abs(km.entries - km.entries.T)) < 1e-12
        assert np.allclose(np.diag(km.entries), 1.0)

    def test_mercer_min_eigenvalue(self):
        # random sets of sizes 1..30, mixed arms, bandwidths over 3 decades
        rng = np.random.default_rng(10)
        worst = 0.0
        for _ in range(200):
            n = int(rng.integers(1, 31))
            p = KernelParams(
                sigma_dist=float(10 ** rng.uniform(0, 3)),
                sigma_doppler=float(10 ** rng.uniform(0, 3)),
                sigma_ntx=float(10 ** rng.uniform(-1, 2)),
            )
            ctxs = [random_context(rng) for _ in range(n)]
            km = build_kernel_matrix(ctxs, p)
            min_eig = float(np.linalg.eigvalsh(km.entries)[0])
            worst = min(worst, min_eig / n)
            assert min_eig >= -1e-8 * n
        assert worst >= -1e-8

    def test_cross_arm_block_structure(self):
        rng = np.random.default_rng(11)
        ctxs = [random_context(rng, arms=(1,)) for _ in range(5)]
        ctxs += [random_context(rng, arms=(3,)) for _ in range(5)]
        km = build_kernel_matrix(ctxs, KernelParams())
        assert np.all(km.entries[:5, 5:] == 0.0)
        assert np.all(km.entries[5:, :5] == 0.0)


def det_by_cofactor(a: np.ndarray) -> float:
    """Brute-force determinant by first-row cofactor expansion."""
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(a[0, 0])
    total = 0.0
    for j in range(n):
        minor = np.delete(np.delete(a, 0, axis=0), j, axis=1)
        total += ((-1.0) ** j) * float(a[0, j]) * det_by_cofactor(minor)
    return total


class TestRidgeLogDet:
    def test_empty_matrix(self):
        assert ridge_log_det(np.zeros((0, 0)), 1.0) == 0.0

    def test_singleton(self):
        x = Context(1, 0.0, 1.0, 1.0, 0)
        km = build_kernel_matrix([x], KernelParams())
        assert ridge_log_det(km, 1.0) == pytest.approx(math.log(2.0))

    def test_matches_cofactor_determinant(self):
        rng = np.random.default_rng(12)
        for lam in (0.5, 1.0, 3.0):
            for _ in range(10):
                ctxs = [random_context(rng, arms=(1,)) for _ in range(5)]
                km = build_kernel_matrix(ctxs, KernelParams())
                expected = math.log(det_by_cofactor(np.eye(5) + km.entries / lam))
                assert ridge_log_det(km, lam) == pytest.approx(expected, abs=1e-9)

    def test_monotone_under_append(self):
        rng = np.random.default_rng(13)
        p = KernelParams()
        for lam in (0.7, 1.0, 2.0):
            ctxs = [random_context(rng)]
            prev = ridge_log_det(build_kernel_matrix(ctxs, p), lam)
            for _ in range(15):
                ctxs.append(random_context(rng))
                cur = ridge_log_det(build_kernel_matrix(ctxs, p), lam)
                assert cur >= prev - 1e-10
                prev = cur

    def test_nonnegative(self):
        rng = np.random.default_rng(14)
        for _ in range(20):
            ctxs = [random_context(rng) for _ in range(int(rng.integers(1, 12)))]
            assert ridge_log_det(build_kernel_matrix(ctxs, KernelParams()), 2.0) >= 0.0

    def test_rejects_bad_ridge(self):
        with pytest.raises(ValueError):
            ridge_log_det(np.eye(2), 0.0)

    def test_reports_non_psd_input(self):
        hopeless = np.array([[1.0, 0.0], [0.0, -5.0]])
        with pytest.raises(ValueError):
            ridge_log_det(hopeless, 1.0)
