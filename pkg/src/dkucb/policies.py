"""Association policies: the kernelized UCB learner and its baselines.

Every policy maps a period observation (per-vehicle candidate contexts plus,
for the centralized ones, full channel state) to an association of each
active vehicle with exactly one base station, and may consume realized
rewards through a feedback hook.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .agent import Agent, AgentConfig
from .env.channel import RateEvaluator
from .env.world import PeriodObservation
from .kernels import CompositeKernel, Context, KernelParams
from .sync import (
    BsStore,
    CommLedger,
    SyncOutcome,
    SyncState,
    should_sync,
    synchronize,
)


@dataclass(frozen=True)
class SyncSettings:
    """Data-sharing knobs: trigger threshold D, subspace radius, trigger mode,
    and the base stations' spatial retention (None capacity = keep forever)."""

    threshold: float = 60.0
    radius: float = 100.0
    mode: str = "ratio_to_new"
    bs_cell_size: float = 25.0
    bs_cell_capacity: int | None = 8

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("sync threshold must be >= 0 (inf allowed)")
        if not self.radius > 0:
            raise ValueError("subspace radius must be > 0 (inf allowed)")
        if not self.bs_cell_size > 0:
            raise ValueError("bs_cell_size must be > 0")
        if self.bs_cell_capacity is not None and self.bs_cell_capacity < 1:
            raise ValueError("bs_cell_capacity must be >= 1 or null")


@dataclass
class PeriodFeedback:
    """Realized outcome of one period handed back to the policy."""

    period: int
    assoc: dict[int, int]
    contexts: dict[int, Context]  # the chosen arm's context per vehicle
    rewards: dict[int, float]  # realized rate, bits/s
    active_ids: list[int] = field(default_factory=list)
    stations: dict[int, tuple] = field(default_factory=dict)


class Policy:
    """Decision interface shared by all association strategies."""

    name = "base"

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        raise NotImplementedError

    def feedback(self, fb: PeriodFeedback) -> dict[int, SyncOutcome]:
        return {}


class RandomPolicy(Policy):
    """Uniform choice among each vehicle's candidate base stations."""

    name = "random"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        assoc = {}
        for vid in sorted(obs.candidates):
            arms = [c.arm for c in obs.candidates[vid]]
            assoc[vid] = arms[int(self.rng.integers(len(arms)))]
        return assoc


class DkUcbPolicy(Policy):
    """Distributed kernelized UCB with event-triggered data sharing.

    Each vehicle runs its own agent; rewards are fed to the learner divided
    by `reward_scale` (the bandwidth by default, making the learned quantity
    a spectral efficiency) so that the exploration weight has a stable
    magnitude.  After recording, the vehicle synchronizes with the base
    station it used whenever the trigger or the moved-distance condition
    holds.
    """

    name = "dkucb"

    def __init__(
        self,
        kernel_params: KernelParams,
        agent_cfg: AgentConfig,
        sync_settings: SyncSettings,
        *,
        reward_scale: float = 1.0,
        kernel=None,
    ):
        self.kernel_params = kernel_params
        self.agent_cfg = agent_cfg
        self.sync_settings = sync_settings
        self.reward_scale = reward_scale
        self.kernel = kernel if kernel is not None else CompositeKernel(kernel_params)
        self.agents: dict[int, Agent] = {}
        self.sync_states: dict[int, dict[int, SyncState]] = {}
        self.bs_store: BsStore | None = None  # built once station positions are known
        self.ledger = CommLedger()

    def _agent(self, vid: int) -> Agent:
        agent = self.agents.get(vid)
        if agent is None:
            agent = Agent(self.kernel, self.kernel_params, self.agent_cfg)
            self.agents[vid] = agent
            self.sync_states[vid] = {}
        return agent

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        assoc = {}
        for vid in sorted(obs.candidates):
            chosen = self._agent(vid).select(obs.candidates[vid])
            assoc[vid] = chosen.arm
        return assoc

    def feedback(self, fb: PeriodFeedback) -> dict[int, SyncOutcome]:
        self.ledger.note_period(fb.period, len(fb.active_ids))
        if self.bs_store is None:
            self.bs_store = BsStore(
                fb.stations,
                cell_size=self.sync_settings.bs_cell_size,
                cell_capacity=self.sync_settings.bs_cell_capacity,
            )
        outcomes: dict[int, SyncOutcome] = {}
        for vid in sorted(fb.assoc):
            agent = self._agent(vid)
            arm = fb.assoc[vid]
            ctx = fb.contexts[vid]
            agent.record(ctx, fb.rewards[vid] / self.reward_scale, key=(vid, fb.period))
            state = self.sync_states[vid].setdefault(arm, SyncState())
            samples = agent.store.arm(arm)
            s = self.sync_settings
            if should_sync(samples, state, ctx, s.threshold, s.radius, fb.stations, s.mode):
                outcomes[vid] = synchronize(
                    vid,
                    arm,
                    agent.store,
                    self.bs_store,
                    state,
                    self.ledger,
                    period=fb.period,
                    current=ctx,
                    radius=s.radius,
                    stations=fb.stations,
                )
        # drop learners of departed vehicles; their uploads stay at the BSs
        present = set(fb.active_ids)
        for vid in list(self.agents):
            if vid not in present:
                del self.agents[vid]
                del self.sync_states[vid]
        return outcomes


class SingleGaussianKernel:
    """Ablation kernel: one isotropic Gaussian over the raw numeric features.

    Keeps the cross-arm zero rule but replaces the per-component similarity
    products by exp(-||x - y||^2 / (2 sigma^2)) on (theta, dist, doppler,
    n_tx) in their native units.
    """

    def __init__(self, sigma: float):
        if not sigma > 0:
            raise ValueError("sigma must be > 0")
        self.sigma = sigma

    def pair(self, x: Context, y: Context) -> float:
        if x.arm != y.arm:
            return 0.0
        d = x.features() - y.features()
        return float(np.exp(-float(d @ d) / (2.0 * self.sigma**2)))

    def cross_same_arm(self, feats: np.ndarray, query: Context) -> np.ndarray:
        d = feats - query.features()
        return np.exp(-np.einsum("ij,ij->i", d, d) / (2.0 * self.sigma**2))

    def matrix_same_arm(self, feats: np.ndarray) -> np.ndarray:
        sq = np.einsum("ij,ij->i", feats, feats)
        d2 = sq[:, None] + sq[None, :] - 2.0 * feats @ feats.T
        np.maximum(d2, 0.0, out=d2)
        return np.exp(-d2 / (2.0 * self.sigma**2))

    def matrix(self, contexts: list[Context]) -> np.ndarray:
        n = len(contexts)
        if n == 0:
            return np.zeros((0, 0))
        feats = np.array([c.features() for c in contexts])
        arms = np.array([c.arm for c in contexts])
        k = self.matrix_same_arm(feats) * (arms[:, None] == arms[None, :])
        return (k + k.T) / 2.0


class GaussianKernelPolicy(DkUcbPolicy):
    """DK-UCB with the composite kernel swapped for a single Gaussian."""

    name = "gausskernel"

    def __init__(self, kernel_params, agent_cfg, sync_settings, *, reward_scale=1.0, sigma=300.0):
        super().__init__(
            kernel_params,
            agent_cfg,
            sync_settings,
            reward_scale=reward_scale,
            kernel=SingleGaussianKernel(sigma),
        )


class HypercubeUcbPolicy(Policy):
    """Context-partitioning UCB: per-arm hypercube cells with mean + bonus.

    The numeric context space is tiled into `cells_per_dim` bins per
    dimension over fixed ranges; each visited cell keeps a running mean and
    count, scored as mean + sqrt(2 log t / n).  Unvisited cells score
    infinity, ties go to the lowest arm id.  Tables are per vehicle.
    """

    name = "hypercube"

    def __init__(
        self,
        *,
        cells_per_dim: int = 8,
        theta_range: float = 2.0 * math.pi,
        dist_range: float = 600.0,
        doppler_range: float = 2100.0,
        ntx_range: float = 16.0,
        reward_scale: float = 1.0,
    ):
        if cells_per_dim < 1:
            raise ValueError("cells_per_dim must be >= 1")
        self.edges = (
            theta_range / cells_per_dim,
            dist_range / cells_per_dim,
            doppler_range / cells_per_dim,
            ntx_range / cells_per_dim,
        )
        self.reward_scale = reward_scale
        self.tables: dict[int, dict[tuple, list]] = {}

    def cell_of(self, ctx: Context) -> tuple:
        f = (ctx.theta, ctx.dist, ctx.doppler, float(ctx.n_tx))
        return (ctx.arm,) + tuple(int(v // e) for v, e in zip(f, self.edges))

    def score(self, vid: int, ctx: Context, period: int) -> float:
        entry = self.tables.get(vid, {}).get(self.cell_of(ctx))
        if entry is None or entry[0] == 0:
            return math.inf
        count, mean = entry
        return mean + math.sqrt(2.0 * math.log(max(period, 2)) / count)

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        assoc = {}
        for vid in sorted(obs.candidates):
            best_arm, best_score = None, -math.inf
            for ctx in sorted(obs.candidates[vid], key=lambda c: c.arm):
                s = self.score(vid, ctx, obs.period)
                if s > best_score:
                    best_arm, best_score = ctx.arm, s
            assoc[vid] = best_arm
        return assoc

    def feedback(self, fb: PeriodFeedback) -> dict[int, SyncOutcome]:
        for vid in sorted(fb.assoc):
            table = self.tables.setdefault(vid, {})
            cell = self.cell_of(fb.contexts[vid])
            entry = table.setdefault(cell, [0, 0.0])
            entry[0] += 1
            entry[1] += (fb.rewards[vid] / self.reward_scale - entry[1]) / entry[0]
        present = set(fb.active_ids)
        for vid in list(self.tables):
            if vid not in present:
                del self.tables[vid]
        return {}


# -- centralized optimization baselines --------------------------------------


def brute_force_optimum(
    evaluator: RateEvaluator,
    candidates: dict[int, list[int]],
    *,
    max_vehicles: int = 6,
    max_stations: int = 4,
) -> tuple[dict[int, int], float]:
    """Exact maximizer of the summed rate over all candidate assignments.

    Guarded enumeration: refuses instances beyond max_vehicles vehicles or
    max_stations distinct candidate stations.
    """
    vids = sorted(candidates)
    if len(vids) > max_vehicles:
        raise ValueError(f"brute force limited to {max_vehicles} vehicles, got {len(vids)}")
    stations = {bs for arms in candidates.values() for bs in arms}
    if len(stations) > max_stations:
        raise ValueError(f"brute force limited to {max_stations} stations, got {len(stations)}")
    best_assoc, best_total = None, -math.inf
    for combo in itertools.product(*(sorted(candidates[v]) for v in vids)):
        assoc = dict(zip(vids, combo))
        total = evaluator.total_rate(assoc)
        if total > best_total:
            best_assoc, best_total = assoc, total
    return best_assoc, best_total


@dataclass
class WcsResult:
    assoc: dict[int, int]
    totals: list[float]  # summed rate after init and after each accepted move


def wcs_assignment(
    evaluator: RateEvaluator,
    candidates: dict[int, list[int]],
    *,
    max_iters: int = 64,
    init: dict[int, int] | None = None,
) -> WcsResult:
    """Worst-connection-swapping local search over candidate assignments.

    Starts from each vehicle's best interference-free station (or `init`),
    then repeatedly moves the currently worst-rate vehicle to whichever of
    its candidates maximizes the summed rate, stopping at a fixed point or
    after max_iters accepted moves.
    """
    vids = sorted(candidates)
    if init is None:
        assoc = {
            vid: max(
                sorted(candidates[vid]),
                key=lambda bs: evaluator.noise_only_rate(vid, bs),
            )
            for vid in vids
        }
    else:
        assoc = dict(init)
    totals = [evaluator.total_rate(assoc)]
    for _ in range(max_iters):
        rates = evaluator.rates(assoc)
        worst = min(sorted(rates), key=lambda vid: (rates[vid], vid))
        current_total = totals[-1]
        best_bs, best_total = assoc[worst], current_total
        for bs in sorted(candidates[worst]):
            if bs == assoc[worst]:
                continue
            trial = dict(assoc)
            trial[worst] = bs
            total = evaluator.total_rate(trial)
            if total > best_total:
                best_bs, best_total = bs, total
        if best_bs == assoc[worst]:
            break
        assoc[worst] = best_bs
        totals.append(best_total)
    return WcsResult(assoc, totals)


class WcsPolicy(Policy):
    """Centralized per-period local search using full channel state."""

    name = "wcs"

    def __init__(self, max_iters: int = 64):
        self.max_iters = max_iters

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        candidates = {vid: [c.arm for c in obs.candidates[vid]] for vid in obs.candidates}
        return wcs_assignment(obs.evaluator, candidates, max_iters=self.max_iters).assoc


class BruteForcePolicy(Policy):
    """Exhaustive per-period optimum; only usable on tiny instances."""

    name = "brute"

    def select(self, obs: PeriodObservation) -> dict[int, int]:
        candidates = {vid: [c.arm for c in obs.candidates[vid]] for vid in obs.candidates}
        assoc, _ = brute_force_optimum(obs.evaluator, candidates)
        return assoc


POLICY_NAMES = ("dkucb", "gausskernel", "hypercube", "random", "wcs", "brute")
