"""Discrete-time vehicular world: arrivals, motion, links, rates, contexts.

Each period advances in a fixed phase order: mobility, link refresh (LOS,
fading, gains), context extraction, association commit, rate evaluation,
memory updates.  Mobility and fading draw from their own RNG streams in a
population-sorted order, so the physical trace is bit-identical across
policies run with the same seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..agent import candidate_set
from ..kernels import Context
from .channel import (
    RateEvaluator,
    ar1_coefficient,
    draw_scatter,
    evolve_scatter,
    fading_power,
    path_loss,
)
from .geometry import MapSpec, default_map, segments_blocked

SPEED_OF_LIGHT = 299_792_458.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class WorldConfig:
    """Physical and traffic parameters of the simulated network.

    All defaults are artifact choices tuned for the built-in synthetic map;
    every one of them is overridable through the run configuration.
    """

    delta_t: float = 2.0
    arrival_rate: float = 0.3
    speed_min_kmh: float = 20.0
    speed_max_kmh: float = 80.0
    carrier_freq_hz: float = 28e9
    bandwidth_hz: float = 100e6
    tx_power_w: float = 1.0
    noise_density_w_per_hz: float = 3.9810717055349565e-21  # -174 dBm/Hz
    mainlobe_gain_db: float = 20.0
    sidelobe_rel_db: float = -20.0
    pathloss_exp_los: float = 2.0
    pathloss_exp_nlos: float = 3.3
    nlos_extra_loss_db: float = 20.0
    rician_k_db: float = 15.0
    doppler_corr_scale: float = 1.0
    ref_dist_m: float = 1.0

    def __post_init__(self):
        if not self.delta_t > 0:
            raise ValueError("delta_t must be > 0")
        if self.arrival_rate < 0:
            raise ValueError("arrival_rate must be >= 0")
        if self.speed_min_kmh > self.speed_max_kmh:
            raise ValueError("speed_min_kmh must be <= speed_max_kmh")
        for name in ("carrier_freq_hz", "bandwidth_hz", "tx_power_w",
                     "noise_density_w_per_hz", "ref_dist_m"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def noise_power(self) -> float:
        return self.noise_density_w_per_hz * self.bandwidth_hz

    @property
    def mainlobe_gain(self) -> float:
        return db_to_linear(self.mainlobe_gain_db)

    @property
    def sidelobe_rel(self) -> float:
        """Misalignment suppression factor relative to the mainlobe."""
        return db_to_linear(self.sidelobe_rel_db)

    @property
    def nlos_penalty(self) -> float:
        return db_to_linear(-self.nlos_extra_loss_db)

    @property
    def rician_k(self) -> float:
        return db_to_linear(self.rician_k_db)


class VehicleState:
    """One vehicle: its route progress and per-BS runtime memory."""

    def __init__(self, vid: int, route, speed_ms: float):
        self.vid = vid
        self.route = route
        self.s = 0.0
        self.speed = speed_ms
        self.scatter = None  # complex (n_bs,) AR(1) state, set on first link refresh
        self.tx_memory: dict[int, int] = {}

    @property
    def position(self) -> np.ndarray:
        return self.route.position(self.s)

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * self.route.direction(self.s)


@dataclass
class PeriodObservation:
    """Everything a policy may look at before committing associations."""

    period: int
    candidates: dict[int, list[Context]]
    evaluator: RateEvaluator
    active_ids: list[int] = field(default_factory=list)


class World:
    """Mutable simulation state; one instance per run."""

    def __init__(self, cfg: WorldConfig, map_spec: MapSpec | None = None, *, seed=0):
        self.cfg = cfg
        self.map = map_spec if map_spec is not None else default_map()
        self.stations = dict(sorted(self.map.stations.items()))
        self.station_ids = list(self.stations)
        self._bs_xy = np.array([self.stations[b] for b in self.station_ids])
        seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        mobility_seq, fading_seq = seq.spawn(2)
        self.rng_mobility = np.random.default_rng(mobility_seq)
        self.rng_fading = np.random.default_rng(fading_seq)
        self.vehicles: dict[int, VehicleState] = {}
        self.period = 0
        self._next_vid = 1
        self._geom = None  # per-period cached link arrays

    # -- per-period phases --------------------------------------------------

    def step_mobility(self):
        """Advance positions, retire finished routes, spawn Poisson arrivals."""
        cfg = self.cfg
        departed = []
        for vid in list(self.vehicles):
            v = self.vehicles[vid]
            v.s += v.speed * cfg.delta_t
            if v.s >= v.route.length:
                departed.append(vid)
        for vid in departed:
            del self.vehicles[vid]
        arrivals = int(self.rng_mobility.poisson(cfg.arrival_rate))
        n_routes = len(self.map.routes)
        for _ in range(arrivals):
            route = self.map.routes[int(self.rng_mobility.integers(n_routes))]
            speed_kmh = float(self.rng_mobility.uniform(cfg.speed_min_kmh, cfg.speed_max_kmh))
            vid = self._next_vid
            self._next_vid += 1
            self.vehicles[vid] = VehicleState(vid, route, speed_kmh / 3.6)

    def refresh_links(self):
        """Recompute geometry, evolve fading, and cache this period's gains."""
        cfg = self.cfg
        vids = sorted(self.vehicles)
        n_v, n_bs = len(vids), len(self.station_ids)
        if n_v == 0:
            self._geom = {"vids": [], "base_gain": np.zeros((0, n_bs))}
            return
        pos = np.array([self.vehicles[v].position for v in vids])
        vel = np.array([self.vehicles[v].velocity for v in vids])
        diff = pos[:, None, :] - self._bs_xy[None, :, :]  # BS -> vehicle vectors
        dist = np.hypot(diff[..., 0], diff[..., 1])
        safe = np.maximum(dist, 1e-12)
        tangential = np.abs(diff[..., 0] * vel[:, None, 1] - diff[..., 1] * vel[:, None, 0]) / safe
        doppler = tangential / cfg.wavelength

        starts = np.repeat(self._bs_xy[None, :, :], n_v, axis=0).reshape(-1, 2)
        ends = np.repeat(pos[:, None, :], n_bs, axis=1).reshape(-1, 2)
        blocked = segments_blocked(ends, starts, self.map.obstacles).reshape(n_v, n_bs)
        los = ~blocked

        # one innovation per (vehicle, BS) pair per period, rows in vid order;
        # a vehicle arriving this period starts from the fresh draw (rho = 0)
        innovation = draw_scatter(self.rng_fading, (n_v, n_bs))
        rho = ar1_coefficient(doppler, cfg.delta_t, cfg.doppler_corr_scale)
        for i, vid in enumerate(vids):
            veh = self.vehicles[vid]
            if veh.scatter is None:
                veh.scatter = innovation[i]
            else:
                veh.scatter = evolve_scatter(veh.scatter, rho[i], innovation[i])
        scatter = np.array([self.vehicles[v].scatter for v in vids])

        gain = path_loss(
            dist,
            cfg.wavelength,
            cfg.ref_dist_m,
            np.where(los, cfg.pathloss_exp_los, cfg.pathloss_exp_nlos),
        )
        gain = gain * np.where(los, 1.0, cfg.nlos_penalty)
        gain = gain * fading_power(scatter, los, cfg.rician_k)
        self._geom = {
            "vids": vids,
            "pos": pos,
            "vel": vel,
            "dist": dist,
            "doppler": doppler,
            "los": los,
            "base_gain": gain,
        }

    def advance(self):
        """Run the mobility and link phases for the next period."""
        self.period += 1
        self.step_mobility()
        self.refresh_links()
        return self.period

    # -- observation / evaluation -------------------------------------------

    def observe(self, r_max: float) -> PeriodObservation:
        """Candidate contexts and a rate evaluator for the current period."""
        cfg = self.cfg
        geom = self._geom
        vids = geom["vids"]
        candidates: dict[int, list[Context]] = {}
        for i, vid in enumerate(vids):
            veh = self.vehicles[vid]
            ctxs = candidate_set(
                geom["pos"][i],
                geom["vel"][i],
                self.stations,
                r_max,
                cfg.wavelength,
                veh.tx_memory,
            )
            if ctxs:
                candidates[vid] = ctxs
        active = sorted(candidates)
        evaluator = RateEvaluator(
            vids,
            self.station_ids,
            geom["base_gain"],
            tx_power=cfg.tx_power_w,
            bandwidth=cfg.bandwidth_hz,
            noise_power=cfg.noise_power,
            mainlobe=cfg.mainlobe_gain,
            sidelobe_rel=cfg.sidelobe_rel,
            candidates={vid: [c.arm for c in candidates.get(vid, [])] for vid in vids},
        )
        return PeriodObservation(self.period, candidates, evaluator, active)

    def commit(self, assoc: dict[int, int], obs: PeriodObservation):
        """Validate the one-BS-per-vehicle association against the candidates."""
        if sorted(assoc) != obs.active_ids:
            raise ValueError(
                "association must cover exactly the vehicles with candidates"
            )
        for vid, bs in assoc.items():
            allowed = [c.arm for c in obs.candidates[vid]]
            if bs not in allowed:
                raise ValueError(f"vehicle {vid} associated with out-of-range BS {bs}")

    def evaluate(self, assoc: dict[int, int], obs: PeriodObservation):
        """Realized rates and per-vehicle counterfactual best responses."""
        rates = obs.evaluator.rates(assoc)
        best = {vid: obs.evaluator.best_response(vid, assoc) for vid in sorted(assoc)}
        return rates, best

    def remember_loads(self, assoc: dict[int, int]):
        """Store this period's concurrent-transmission counts at the used BSs."""
        counts: dict[int, int] = {}
        for bs in assoc.values():
            counts[bs] = counts.get(bs, 0) + 1
        for vid, bs in assoc.items():
            self.vehicles[vid].tx_memory[bs] = counts[bs]

    # -- inspection helpers ---------------------------------------------------

    def positions(self) -> dict[int, tuple]:
        return {vid: tuple(self.vehicles[vid].position) for vid in sorted(self.vehicles)}

    def extract_context(self, vid: int, bs: int) -> Context:
        """Context of one vehicle toward one BS regardless of range."""
        veh = self.vehicles[vid]
        ctxs = candidate_set(
            veh.position, veh.velocity, {bs: self.stations[bs]}, math.inf,
            self.cfg.wavelength, veh.tx_memory,
        )
        return ctxs[0]
