"""Event-triggered data sharing between vehicles and base stations.

A vehicle synchronizes with the base station it just used when either (a)
its batch of samples accumulated since the last synchronization carries
enough information volume, measured by a log-determinant statistic, or (b)
it has moved further than the subspace radius from where it last
synchronized.  A synchronization uploads the new local samples and downloads
the other present vehicles' samples that fall inside a location ball around
the current context.  All traffic is tallied in a ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .agent import ArmSamples, SampleStore
from .kernels import Context, KernelParams, ridge_log_det

TRIGGER_RATIO_TO_NEW = "ratio_to_new"
TRIGGER_GAIN_SINCE_SYNC = "gain_since_sync"


def context_location(ctx: Context, stations: Mapping[int, tuple]) -> tuple:
    """Vehicle location implied by a context: BS position + dist * (cos, sin)."""
    bx, by = stations[ctx.arm]
    return (bx + ctx.dist * math.cos(ctx.theta), by + ctx.dist * math.sin(ctx.theta))


def location_distance(a: Context, b: Context, stations: Mapping[int, tuple]) -> float:
    ax, ay = context_location(a, stations)
    bx, by = context_location(b, stations)
    return math.hypot(ax - bx, ay - by)


def trigger_statistic(
    new_contexts: list[Context],
    all_contexts: list[Context],
    params: KernelParams,
    kernel=None,
    mode: str = TRIGGER_RATIO_TO_NEW,
) -> float:
    """Left-hand side of the synchronization trigger.

    |new| * [logdet(I + K_all/lambda) - logdet(I + K_ref/lambda)] where the
    reference set is the new batch itself in the default mode, or the archive
    as of the last synchronization in the "gain_since_sync" mode (taken as
    all_contexts with the trailing |new| entries removed).
    """
    m = len(new_contexts)
    if m == 0:
        return 0.0
    from .kernels import CompositeKernel

    kernel = kernel or CompositeKernel(params)
    lam = params.ridge_lambda
    jit = params.jitter
    ld_all = ridge_log_det(kernel.matrix(all_contexts), lam, jit)
    if mode == TRIGGER_RATIO_TO_NEW:
        ref = new_contexts
    elif mode == TRIGGER_GAIN_SINCE_SYNC:
        ref = all_contexts[: len(all_contexts) - m]
    else:
        raise ValueError(f"unknown trigger mode {mode!r}")
    ld_ref = ridge_log_det(kernel.matrix(ref), lam, jit)
    return m * (ld_all - ld_ref)


def trigger(
    new_contexts: list[Context],
    all_contexts: list[Context],
    params: KernelParams,
    threshold: float,
    kernel=None,
    mode: str = TRIGGER_RATIO_TO_NEW,
) -> bool:
    """True iff the trigger statistic strictly exceeds `threshold`."""
    if math.isinf(threshold):
        return False
    if not new_contexts:
        return False
    return trigger_statistic(new_contexts, all_contexts, params, kernel, mode) > threshold


def _trigger_statistic_cached(samples: ArmSamples, mode: str) -> float:
    """Trigger statistic off an arm archive, reusing its cached factorization."""
    m = samples.new_count()
    if m == 0:
        return 0.0
    lam = samples.params.ridge_lambda
    jit = samples.params.jitter
    ld_all = samples.log_det_ridge()
    if mode == TRIGGER_RATIO_TO_NEW:
        ref_feats = samples.feats[samples.synced_prefix :]
    elif mode == TRIGGER_GAIN_SINCE_SYNC:
        ref_feats = samples.feats[: samples.synced_prefix]
    else:
        raise ValueError(f"unknown trigger mode {mode!r}")
    if ref_feats.shape[0] == 0:
        ld_ref = 0.0
    else:
        ld_ref = ridge_log_det(samples.kernel.matrix_same_arm(ref_feats), lam, jit)
    return m * (ld_all - ld_ref)


@dataclass
class SyncState:
    """Last-synchronization bookkeeping for one (vehicle, arm) pair."""

    last_period: int | None = None
    last_context: Context | None = None
    samples_at_sync: int = 0


def should_sync(
    samples: ArmSamples,
    state: SyncState,
    current: Context,
    threshold: float,
    radius: float,
    stations: Mapping[int, tuple],
    mode: str = TRIGGER_RATIO_TO_NEW,
) -> bool:
    """Synchronization condition: trigger event OR moved beyond the radius.

    A pair that has never synchronized is treated as infinitely far from its
    last synchronization point, so first contact synchronizes unless the
    radius itself is infinite.
    """
    if state.last_context is None:
        moved = math.inf
    else:
        moved = location_distance(current, state.last_context, stations)
    if moved > radius:
        return True
    if math.isinf(threshold):
        return False
    return _trigger_statistic_cached(samples, mode) > threshold


def subspace_filter(
    pool: list,
    center: Context,
    radius: float,
    stations: Mapping[int, tuple],
    ctx_of: Callable = lambda item: item[0],
) -> list:
    """Entries of `pool` whose implied location is strictly within `radius`
    of the location implied by `center`."""
    if not radius > 0:
        raise ValueError("subspace radius must be > 0")
    cx, cy = context_location(center, stations)
    kept = []
    for item in pool:
        x, y = context_location(ctx_of(item), stations)
        if math.hypot(x - cx, y - cy) < radius:
            kept.append(item)
    return kept


@dataclass(frozen=True)
class SharedSample:
    """One (context, reward) pair as stored at a base station."""

    vehicle: int
    period: int
    context: Context
    reward: float

    @property
    def key(self) -> tuple:
        return (self.vehicle, self.period, self.context.arm)


class BsStore:
    """Per-base-station aggregation of every vehicle's uploaded samples.

    Uploads are kept after their vehicle leaves the network; the base station
    is infrastructure.  An optional retention cap bounds the archive: samples
    are binned into square spatial cells (by their implied location) and each
    (arm, cell) bin keeps only the newest `cell_capacity` samples.  Without a
    cap the store only grows and never discards anything.
    """

    def __init__(self, stations=None, cell_size: float = 25.0, cell_capacity=None):
        self._cells: dict[int, dict[tuple, list[SharedSample]]] = {}
        self._keys: dict[int, set] = {}
        self._stations = stations
        self._cell_size = cell_size
        self._cell_capacity = cell_capacity

    def _cell_of(self, ctx: Context) -> tuple:
        if self._cell_capacity is None or self._stations is None:
            return (0, 0)
        x, y = context_location(ctx, self._stations)
        return (int(x // self._cell_size), int(y // self._cell_size))

    def insert(self, sample: SharedSample) -> bool:
        arm = sample.context.arm
        keys = self._keys.setdefault(arm, set())
        if sample.key in keys:
            return False
        keys.add(sample.key)
        bins = self._cells.setdefault(arm, {})
        cell = bins.setdefault(self._cell_of(sample.context), [])
        cell.append(sample)
        if self._cell_capacity is not None and len(cell) > self._cell_capacity:
            del cell[0]  # evict the oldest sample of this cell
        return True

    def items_for(self, arm: int, vehicle: int | None = None) -> list[SharedSample]:
        out = []
        bins = self._cells.get(arm, {})
        for cell in sorted(bins):
            for s in bins[cell]:
                if vehicle is None or s.vehicle == vehicle:
                    out.append(s)
        return out

    def pool(self, arm: int, exclude: int, before_period: int) -> list[SharedSample]:
        """Other vehicles' retained samples uploaded before `before_period`."""
        out = []
        bins = self._cells.get(arm, {})
        for cell in sorted(bins):
            out.extend(
                s
                for s in bins[cell]
                if s.vehicle != exclude and s.period < before_period
            )
        return out

    def total_items(self) -> int:
        return sum(len(cell) for bins in self._cells.values() for cell in bins.values())


@dataclass
class PeriodTraffic:
    syncs: int = 0
    items_up: int = 0
    items_down: int = 0
    items_skipped: int = 0
    vehicles_active: int = 0
    vehicles_synced: int = 0


@dataclass
class SyncRecord:
    period: int
    vehicle: int
    arm: int
    uploaded: int
    pool_size: int
    downloaded: int


class CommLedger:
    """Monotone per-period accounting of synchronization traffic."""

    def __init__(self):
        self.periods: dict[int, PeriodTraffic] = {}
        self.sync_records: list[SyncRecord] = []

    def note_period(self, period: int, vehicles_active: int):
        row = self.periods.setdefault(period, PeriodTraffic())
        row.vehicles_active = vehicles_active

    def note_sync(self, period, vehicle, arm, uploaded, pool_size, downloaded):
        row = self.periods.setdefault(period, PeriodTraffic())
        row.syncs += 1
        row.items_up += uploaded
        row.items_down += downloaded
        row.items_skipped += pool_size - downloaded
        row.vehicles_synced += 1
        self.sync_records.append(
            SyncRecord(period, vehicle, arm, uploaded, pool_size, downloaded)
        )

    @property
    def total_syncs(self) -> int:
        return sum(r.syncs for r in self.periods.values())

    @property
    def total_uploaded(self) -> int:
        return sum(r.items_up for r in self.periods.values())

    @property
    def total_downloaded(self) -> int:
        return sum(r.items_down for r in self.periods.values())

    @property
    def total_skipped(self) -> int:
        return sum(r.items_skipped for r in self.periods.values())


def sync_rate(ledger: CommLedger, horizon: int) -> float:
    """Fraction of vehicle-periods in which the vehicle synchronized.

    For a single vehicle present over all `horizon` periods this is the
    number of periods with a synchronization divided by the horizon; with
    many vehicles it is the traffic-weighted average of that per-vehicle
    rate (synced vehicle-periods over active vehicle-periods).
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    active = sum(r.vehicles_active for t, r in ledger.periods.items() if t <= horizon)
    if active == 0:
        return 0.0
    synced = sum(r.vehicles_synced for t, r in ledger.periods.items() if t <= horizon)
    return synced / active


@dataclass(frozen=True)
class SyncOutcome:
    uploaded: int
    pool_size: int
    downloaded: int
    merged: int


def synchronize(
    vehicle: int,
    arm: int,
    store: SampleStore,
    bs_store: BsStore,
    state: SyncState,
    ledger: CommLedger,
    *,
    period: int,
    current: Context,
    radius: float,
    stations: Mapping[int, tuple],
) -> SyncOutcome:
    """Run one synchronization for (vehicle, arm) and update all state.

    Uploads the local samples recorded since the last synchronization,
    downloads the subspace-filtered pool of every other vehicle's samples
    (only data uploaded in earlier periods is visible), merges them into the
    vehicle's archive with de-duplication, and stamps the sync state.
    """
    samples = store.arm(arm)
    start = samples.synced_prefix
    upload_contexts = samples.contexts[start:]
    upload_rewards = samples.rewards[start:]
    upload_keys = samples.keys[start:]
    uploaded = 0
    for offset, (ctx, reward, key) in enumerate(
        zip(upload_contexts, upload_rewards, upload_keys)
    ):
        if key is None:
            # unkeyed local sample: synthesize a stable provenance stamp
            key = (vehicle, -(start + offset + 1))
        if bs_store.insert(SharedSample(key[0], key[1], ctx, float(reward))):
            uploaded += 1

    pool = bs_store.pool(arm, exclude=vehicle, before_period=period)
    sent = subspace_filter(pool, current, radius, stations, ctx_of=lambda s: s.context)
    merged = 0
    for shared in sent:
        if samples.add(shared.context, shared.reward, key=(shared.vehicle, shared.period)):
            merged += 1

    samples.mark_synced()
    state.last_period = period
    state.last_context = current
    state.samples_at_sync = samples.n
    ledger.note_sync(period, vehicle, arm, uploaded, len(pool), len(sent))
    return SyncOutcome(uploaded, len(pool), len(sent), merged)
