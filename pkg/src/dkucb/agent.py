"""Per-vehicle kernelized UCB agent.

Each agent keeps one sample archive per arm (base station), estimates the
mean transmission rate and its uncertainty for a query context by kernel
ridge regression over that archive, and picks the arm with the highest
mean + alpha * deviation index.  Archives cache the Cholesky factor of
(K + lambda*I) so that repeated queries between mutations cost one
triangular solve each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import Context, KernelParams, spd_cholesky

ALPHA_FIXED = "fixed"
ALPHA_INFORMATION = "information"


@dataclass(frozen=True)
class Estimate:
    """Estimated mean reward and standard deviation at one context."""

    mu: float
    sigma: float


@dataclass(frozen=True)
class AgentConfig:
    """Arm-selection settings.

    alpha weighs the uncertainty bonus in the UCB index; r_max bounds the
    candidate base stations by distance.  alpha_mode "information" replaces
    the fixed alpha with sqrt(ridge)*theta_norm + noise_scale *
    sqrt(4*log(horizon/delta) + 2*logdet(I + K/ridge)) computed from the
    queried arm's current archive; its four coefficients have no defaults
    and must be supplied explicitly.
    """

    alpha: float = 2.0
    r_max: float = 600.0
    alpha_mode: str = ALPHA_FIXED
    theta_norm: float | None = None
    noise_scale: float | None = None
    delta: float | None = None
    horizon: int | None = None

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if self.alpha_mode not in (ALPHA_FIXED, ALPHA_INFORMATION):
            raise ValueError(f"unknown alpha_mode {self.alpha_mode!r}")
        if self.alpha_mode == ALPHA_INFORMATION:
            missing = [
                n
                for n in ("theta_norm", "noise_scale", "delta", "horizon")
                if getattr(self, n) is None
            ]
            if missing:
                raise ValueError(
                    "alpha_mode 'information' requires explicit " + ", ".join(missing)
                )


class ArmSamples:
    """Ordered (context, reward) archive for a single arm.

    Rows [synced_prefix:] are the locally recorded samples not yet uploaded
    to the arm's base station; downloaded samples are always folded into the
    synchronized prefix.  Every row carries a (vehicle, period) key used to
    de-duplicate shared data.

    The Cholesky factor of (K + lambda*I) is kept current by appending rows
    incrementally (O(n^2) per new sample), falling back to a full jittered
    refactorization only if an appended pivot degenerates.
    """

    def __init__(self, arm: int, kernel, params: KernelParams):
        self.arm = arm
        self.kernel = kernel
        self.params = params
        self.n = 0
        self.synced_prefix = 0
        self._feats = np.empty((16, 4))
        self._rewards = np.empty(16)
        self._contexts: list[Context] = []
        self._keys: list[tuple] = []
        self._key_set: set = set()
        self._lower = np.empty((16, 16))  # growing lower-triangular factor buffer
        self._factored = 0  # rows of the archive covered by the factor
        self._weights = None
        self._log_det = None

    # -- storage ----------------------------------------------------------

    def __len__(self) -> int:
        return self.n

    @property
    def feats(self) -> np.ndarray:
        return self._feats[: self.n]

    @property
    def rewards(self) -> np.ndarray:
        return self._rewards[: self.n]

    @property
    def contexts(self) -> list[Context]:
        return self._contexts

    @property
    def keys(self) -> list[tuple]:
        return self._keys

    def has_key(self, key) -> bool:
        return key in self._key_set

    def new_count(self) -> int:
        """Locally recorded samples since the last synchronization."""
        return self.n - self.synced_prefix

    def new_contexts(self) -> list[Context]:
        return self._contexts[self.synced_prefix :]

    def add(self, context: Context, reward: float, key=None) -> bool:
        """Append one sample; returns False if `key` was already present."""
        if context.arm != self.arm:
            raise ValueError(
                f"context for arm {context.arm} recorded against arm {self.arm}"
            )
        if not (math.isfinite(reward) and reward >= 0):
            raise ValueError(f"reward must be finite and >= 0, got {reward}")
        if key is not None and key in self._key_set:
            return False
        if self.n == self._feats.shape[0]:
            grown = self._feats.shape[0] * 2
            feats = np.empty((grown, 4))
            feats[: self.n] = self._feats[: self.n]
            self._feats = feats
            rewards = np.empty(grown)
            rewards[: self.n] = self._rewards[: self.n]
            self._rewards = rewards
        self._feats[self.n] = context.features()
        self._rewards[self.n] = reward
        self._contexts.append(context)
        self._keys.append(key)
        if key is not None:
            self._key_set.add(key)
        self.n += 1
        self._weights = None
        return True

    def mark_synced(self):
        self.synced_prefix = self.n

    # -- cached ridge solve -------------------------------------------------

    def _refactor(self):
        """Full jittered factorization of K + lambda*I into the buffer."""
        k = self.kernel.matrix_same_arm(self.feats)
        k[np.diag_indices_from(k)] += self.params.ridge_lambda
        c, _ = spd_cholesky(k, self.params.jitter)
        if self._lower.shape[0] < self.n:
            cap = self._lower.shape[0]
            while cap < self.n:
                cap *= 2
            self._lower = np.empty((cap, cap))
        self._lower[: self.n, : self.n] = np.tril(c)
        self._factored = self.n

    def _ensure_solver(self):
        if self._weights is not None or self.n == 0:
            return
        lam = self.params.ridge_lambda
        if self._factored == 0 or self._factored > self.n:
            self._refactor()
        else:
            if self._lower.shape[0] < self.n:
                cap = self._lower.shape[0]
                while cap < self.n:
                    cap *= 2
                grown = np.empty((cap, cap))
                grown[: self._factored, : self._factored] = self._lower[
                    : self._factored, : self._factored
                ]
                self._lower = grown
            # append one factor row per new sample
            for i in range(self._factored, self.n):
                lower = self._lower[:i, :i]
                k_row = self.kernel.cross_same_arm(self._feats[:i], self._contexts[i])
                sol = solve_triangular(
                    lower, k_row, lower=True, check_finite=False
                ) if i else k_row[:0]
                pivot = 1.0 + lam - float(sol @ sol)
                if pivot <= 1e-12 * lam:
                    self._refactor()
                    break
                self._lower[i, :i] = sol
                self._lower[i, i] = math.sqrt(pivot)
                self._factored = i + 1
        lower = self._lower[: self.n, : self.n]
        z = solve_triangular(lower, self.rewards, lower=True, check_finite=False)
        self._weights = solve_triangular(
            lower, z, lower=True, trans=1, check_finite=False
        )
        self._log_det = 2.0 * float(
            np.sum(np.log(np.diag(lower)))
        ) - self.n * math.log(lam)
        if self._log_det < 0.0:
            self._log_det = 0.0

    def log_det_ridge(self) -> float:
        """log det(I + K/lambda) over the whole archive."""
        if self.n == 0:
            return 0.0
        self._ensure_solver()
        return self._log_det

    def estimate(self, x: Context) -> Estimate:
        if x.arm != self.arm:
            raise ValueError(f"query for arm {x.arm} against samples of arm {self.arm}")
        lam = self.params.ridge_lambda
        if self.n == 0:
            # empty-archive limit of the ridge formulas: kappa(x, x) = 1
            return Estimate(0.0, lam ** -0.5)
        self._ensure_solver()
        k_vec = self.kernel.cross_same_arm(self.feats, x)
        mu = float(k_vec @ self._weights)
        v = solve_triangular(
            self._lower[: self.n, : self.n], k_vec, lower=True, check_finite=False
        )
        radicand = 1.0 - float(v @ v)
        if radicand < 0.0:
            radicand = 0.0
        return Estimate(mu, math.sqrt(radicand / lam))


class SampleStore:
    """All of one agent's arm archives, created lazily per arm."""

    def __init__(self, kernel, params: KernelParams):
        self.kernel = kernel
        self.params = params
        self._arms: dict[int, ArmSamples] = {}

    def arm(self, arm_id: int) -> ArmSamples:
        samples = self._arms.get(arm_id)
        if samples is None:
            samples = ArmSamples(arm_id, self.kernel, self.params)
            self._arms[arm_id] = samples
        return samples

    def arms(self) -> list[int]:
        return sorted(self._arms)

    def total_samples(self) -> int:
        return sum(s.n for s in self._arms.values())


def estimate(x: Context, samples: ArmSamples) -> Estimate:
    """Ridge estimate of mean reward and deviation for `x` from `samples`."""
    return samples.estimate(x)


def record(store: SampleStore, x: Context, reward: float, key=None) -> bool:
    """Append one observed (context, reward) pair to its arm's archive."""
    return store.arm(x.arm).add(x, reward, key=key)


def ucb_weight(cfg: AgentConfig, samples: ArmSamples) -> float:
    """Exploration weight: the fixed alpha or the information-based schedule."""
    if cfg.alpha_mode == ALPHA_FIXED:
        return cfg.alpha
    lam = samples.params.ridge_lambda
    return math.sqrt(lam) * cfg.theta_norm + cfg.noise_scale * math.sqrt(
        4.0 * math.log(cfg.horizon / cfg.delta) + 2.0 * samples.log_det_ridge()
    )


def select_arm(candidates: list[Context], store: SampleStore, cfg: AgentConfig) -> Context:
    """Pick the candidate maximizing mu + alpha*sigma; ties go to the lowest arm id."""
    if not candidates:
        raise ValueError("no candidate base station within range")
    arms = [c.arm for c in candidates]
    if len(set(arms)) != len(arms):
        raise ValueError("candidate arms must be distinct")
    best = None
    best_index = -math.inf
    for ctx in sorted(candidates, key=lambda c: c.arm):
        samples = store.arm(ctx.arm)
        est = samples.estimate(ctx)
        index = est.mu + ucb_weight(cfg, samples) * est.sigma
        if index > best_index:
            best = ctx
            best_index = index
    return best


def candidate_set(
    position,
    velocity,
    stations: Mapping[int, tuple],
    r_max: float,
    wavelength: float,
    tx_memory: Mapping[int, int] | None = None,
) -> list[Context]:
    """Contexts for every base station strictly closer than r_max.

    The Doppler entry is |tangential speed| / wavelength, the speed component
    orthogonal to the BS->vehicle direction.  tx_memory supplies the
    remembered concurrent-transmission counts (0 when never contacted).
    """
    if not r_max > 0:
        raise ValueError("r_max must be > 0")
    px, py = float(position[0]), float(position[1])
    vx, vy = float(velocity[0]), float(velocity[1])
    tx_memory = tx_memory or {}
    out = []
    for bs_id in sorted(stations):
        bx, by = stations[bs_id]
        dx, dy = px - bx, py - by
        dist = math.hypot(dx, dy)
        if dist >= r_max:
            continue
        theta = math.atan2(dy, dx) % (2.0 * math.pi)
        if dist > 0:
            tangential = abs(dx * vy - dy * vx) / dist
        else:
            tangential = math.hypot(vx, vy)
        out.append(
            Context(
                arm=bs_id,
                theta=theta,
                dist=dist,
                doppler=tangential / wavelength,
                n_tx=int(tx_memory.get(bs_id, 0)),
            )
        )
    return out


class Agent:
    """A vehicle's learner: one sample store plus the UCB selection rule."""

    def __init__(self, kernel, params: KernelParams, cfg: AgentConfig):
        self.kernel = kernel
        self.params = params
        self.cfg = cfg
        self.store = SampleStore(kernel, params)

    def select(self, candidates: list[Context]) -> Context:
        return select_arm(candidates, self.store, self.cfg)

    def record(self, x: Context, reward: float, key=None) -> bool:
        return record(self.store, x, reward, key=key)

    def estimate(self, x: Context) -> Estimate:
        return self.store.arm(x.arm).estimate(x)
