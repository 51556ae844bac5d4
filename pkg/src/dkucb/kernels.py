"""Composite context kernel and the dense linear-algebra primitives built on it.

The kernel scores the similarity of two (base station, geometry, Doppler,
load) observations as a product of four component kernels, one per feature,
and is identically zero across different base stations.  Everything downstream
(rate estimation, synchronization triggering) consumes either single kernel
values, cross-kernel vectors, or full kernel matrices produced here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi

#: context dimension: arm id + (theta, dist, doppler, n_tx)
CONTEXT_DIM = 5


@dataclass(frozen=True)
class Context:
    """One vehicle's observation of one base station at selection time.

    theta   orientation of the BS->vehicle vector vs. the positive x-axis,
            radians, normalised into [0, 2*pi)
    dist    vehicle-BS distance in meters
    doppler maximum Doppler spread in Hz (tangential speed / wavelength)
    n_tx    concurrent-transmission count remembered from the last contact
            with this BS (0 if never contacted)
    """

    arm: int
    theta: float
    dist: float
    doppler: float
    n_tx: int

    def __post_init__(self):
        for name in ("theta", "dist", "doppler"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"context field {name} must be finite")
        if self.dist < 0:
            raise ValueError("context dist must be >= 0")
        if self.doppler < 0:
            raise ValueError("context doppler must be >= 0")
        if self.n_tx < 0:
            raise ValueError("context n_tx must be >= 0")
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)

    def features(self) -> np.ndarray:
        """Numeric feature vector (theta, dist, doppler, n_tx)."""
        return np.array([self.theta, self.dist, self.doppler, float(self.n_tx)])


@dataclass(frozen=True)
class KernelParams:
    """Bandwidths of the component kernels plus the ridge regularizer.

    Units: sigma_dist in meters, sigma_doppler in Hz, sigma_ntx in
    transmission counts.  The defaults are artifact tuning choices, not
    values taken from any external source.
    """

    sigma_dist: float = 150.0
    sigma_doppler: float = 400.0
    sigma_ntx: float = 6.0
    ridge_lambda: float = 1.0
    jitter: float = 1e-10

    def __post_init__(self):
        for name in ("sigma_dist", "sigma_doppler", "sigma_ntx", "ridge_lambda"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"kernel parameter {name} must be > 0, got {v}")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")


def angle_kernel(theta_a, theta_b):
    """Blockage-direction similarity: triangular in the wrapped angular gap.

    The gap is wrapped to [0, pi]; directions more than pi/2 apart share no
    blockage geometry and score 0.  The triangular profile (rather than a
    clipped cosine) is the self-convolution of a box on the circle, so its
    Fourier coefficients are non-negative and every kernel matrix it builds
    is positive semi-definite at any size.
    """
    delta = np.abs(np.asarray(theta_a, dtype=float) - theta_b) % TWO_PI
    delta = np.minimum(delta, TWO_PI - delta)
    return np.maximum(1.0 - delta / HALF_PI, 0.0)


def distance_kernel(dist_a, dist_b, sigma_dist):
    """Gaussian similarity in vehicle-BS distance (path loss / blockage reach)."""
    d = np.asarray(dist_a, dtype=float) - dist_b
    return np.exp(-(d * d) / (2.0 * sigma_dist * sigma_dist))


def doppler_kernel(doppler_a, doppler_b, sigma_doppler):
    """Exponential (Laplacian) similarity in maximum Doppler spread."""
    return np.exp(-np.abs(np.asarray(doppler_a, dtype=float) - doppler_b) / sigma_doppler)


def tx_count_kernel(n_a, n_b, sigma_ntx):
    """Triangular similarity in concurrent-transmission count (interference)."""
    return np.maximum(1.0 - np.abs(np.asarray(n_a, dtype=float) - n_b) / sigma_ntx, 0.0)


class CompositeKernel:
    """Product of the four component kernels; zero across different arms.

    Exposes three evaluation shapes used by the estimator and the sync
    trigger: scalar pairs, a cross vector of one query against a same-arm
    sample block, and a full pairwise matrix over mixed-arm contexts.
    """

    def __init__(self, params: KernelParams):
        self.params = params

    def pair(self, x: Context, y: Context) -> float:
        if x.arm != y.arm:
            return 0.0
        p = self.params
        v = (
            angle_kernel(x.theta, y.theta)
            * distance_kernel(x.dist, y.dist, p.sigma_dist)
            * doppler_kernel(x.doppler, y.doppler, p.sigma_doppler)
            * tx_count_kernel(x.n_tx, y.n_tx, p.sigma_ntx)
        )
        return float(v)

    def cross_same_arm(self, feats: np.ndarray, query: Context) -> np.ndarray:
        """Kernel values of `query` against an (n, 4) block of same-arm features."""
        p = self.params
        return (
            angle_kernel(feats[:, 0], query.theta)
            * distance_kernel(feats[:, 1], query.dist, p.sigma_dist)
            * doppler_kernel(feats[:, 2], query.doppler, p.sigma_doppler)
            * tx_count_kernel(feats[:, 3], query.n_tx, p.sigma_ntx)
        )

    def matrix_same_arm(self, feats: np.ndarray) -> np.ndarray:
        """Pairwise kernel matrix over an (n, 4) block of same-arm features."""
        p = self.params
        th = feats[:, 0]
        k = angle_kernel(th[:, None], th[None, :])
        d = feats[:, 1]
        k = k * distance_kernel(d[:, None], d[None, :], p.sigma_dist)
        f = feats[:, 2]
        k = k * doppler_kernel(f[:, None], f[None, :], p.sigma_doppler)
        n = feats[:, 3]
        k = k * tx_count_kernel(n[:, None], n[None, :], p.sigma_ntx)
        return k

    def matrix(self, contexts: list[Context]) -> np.ndarray:
        n = len(contexts)
        if n == 0:
            return np.zeros((0, 0))
        feats = np.array([c.features() for c in contexts])
        arms = np.array([c.arm for c in contexts])
        k = self.matrix_same_arm(feats)
        k = k * (arms[:, None] == arms[None, :])
        # exact symmetry regardless of float noise in the component products
        return (k + k.T) / 2.0


def context_kernel(x: Context, y: Context, params: KernelParams) -> float:
    """Similarity of two contexts in [0, 1]; 0 whenever the arms differ."""
    return CompositeKernel(params).pair(x, y)


@dataclass
class KernelMatrix:
    """Pairwise kernel values over an ordered context set."""

    entries: np.ndarray
    order: list[Context] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def build_kernel_matrix(contexts: list[Context], params: KernelParams) -> KernelMatrix:
    """Dense kernel matrix over `contexts` (0x0 for an empty set)."""
    return KernelMatrix(CompositeKernel(params).matrix(list(contexts)), list(contexts))


def spd_cholesky(a: np.ndarray, jitter: float):
    """Cholesky factor of a symmetric matrix expected to be PD.

    On failure, a diagonal jitter is added and escalated by 10x at most three
    times before giving up; a clean factorization never sees any jitter.
    """
    try:
        return cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    if jitter > 0:
        eye = np.eye(a.shape[0])
        for bump in (jitter, 10.0 * jitter, 100.0 * jitter):
            try:
                return cho_factor(a + bump * eye, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                continue
    raise ValueError(
        "matrix is not positive definite (factorization failed after jitter escalation)"
    )


def ridge_log_det(kernel_matrix, ridge_lambda: float, jitter: float = 1e-10) -> float:
    """log det(I + K / ridge_lambda) for a PSD kernel matrix K.

    Computed as log det(K + lambda*I) - n*log(lambda) through a Cholesky
    factorization; accepts a KernelMatrix or a raw ndarray.  The empty matrix
    yields 0.  The result is clamped at 0 against round-off.
    """
    k = kernel_matrix.entries if isinstance(kernel_matrix, KernelMatrix) else np.asarray(kernel_matrix)
    n = k.shape[0]
    if n == 0:
        return 0.0
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be > 0")
    c, _ = spd_cholesky(k + ridge_lambda * np.eye(n), jitter)
    val = 2.0 * float(np.sum(np.log(np.diag(c)))) - n * math.log(ridge_lambda)
    return max(val, 0.0)
