"""Seeded scenario runner: configuration, per-period metrics, runs and sweeps.

A run executes one policy over T periods of one world trace and logs one row
per active vehicle per period.  Every headline number in the run summary is
recomputable from those rows.  Sweeps rerun the same configuration with one
parameter varied, reusing the same seeds so comparisons are paired.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np
import yaml

from .agent import AgentConfig
from .env.geometry import MapSpec, default_map, parse_geometry_file
from .env.world import World, WorldConfig
from .kernels import KernelParams
from .policies import (
    BruteForcePolicy,
    DkUcbPolicy,
    GaussianKernelPolicy,
    HypercubeUcbPolicy,
    PeriodFeedback,
    Policy,
    RandomPolicy,
    SyncSettings,
    WcsPolicy,
)

#: scalars per shared item: the five context components plus the reward
ITEM_SCALARS = 6
BYTES_PER_SCALAR = 8


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def default_config() -> dict:
    """Full run configuration with the artifact's default values."""
    return {
        "world": {
            "delta_t": 2.0,
            "arrival_rate": 0.3,
            "speed_min_kmh": 20.0,
            "speed_max_kmh": 80.0,
            "carrier_freq_hz": 28.0e9,
            "bandwidth_hz": 100.0e6,
            "tx_power_w": 1.0,
            "noise_density_w_per_hz": 3.9810717055349565e-21,
            "mainlobe_gain_db": 20.0,
            "sidelobe_rel_db": -20.0,
            "pathloss_exp_los": 2.0,
            "pathloss_exp_nlos": 3.3,
            "nlos_extra_loss_db": 20.0,
            "rician_k_db": 15.0,
            "doppler_corr_scale": 1.0,
            "ref_dist_m": 1.0,
            "geometry_file": None,
        },
        "run": {
            "policy": "dkucb",
            "periods": 3000,
            "seed": 0,
            "out_dir": None,
        },
        "agent": {
            "alpha": 2.0,
            "r_max_m": 600.0,
            "reward_scale": "bandwidth",
            "alpha_mode": "fixed",
            "theta_norm": None,
            "noise_scale": None,
            "delta": None,
            "horizon": None,
        },
        "kernel": {
            "sigma_dist": 150.0,
            "sigma_doppler": 400.0,
            "sigma_ntx": 6.0,
            "ridge_lambda": 1.0,
            "jitter": 1.0e-10,
        },
        "sync": {
            "trigger_threshold": 60.0,
            "subspace_radius_m": 100.0,
            "trigger_mode": "ratio_to_new",
            "bs_cell_size_m": 25.0,
            "bs_cell_capacity": 8,
        },
        "baselines": {
            "sigma_gaussian": 300.0,
            "hypercube_cells": 8,
            "wcs_max_iters": 64,
        },
    }


def _merge_section(base: dict, override: dict, section: str) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown configuration key {section}.{key}")
        merged[key] = value
    return merged


def merge_config(overrides: dict) -> dict:
    """Overlay a partial configuration dict onto the defaults."""
    cfg = default_config()
    for section, content in (overrides or {}).items():
        if section not in cfg:
            raise ConfigError(f"unknown configuration section {section!r}")
        if content is None:
            continue
        if not isinstance(content, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        cfg[section] = _merge_section(cfg[section], content, section)
    return cfg


def load_config(path) -> dict:
    """Read a YAML configuration file and merge it over the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return merge_config(data)


def _as_float(cfg, section, key, *, minimum=None, strict=False, allow_inf=False) -> float:
    value = cfg[section][key]
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{section}.{key} must be a number, got {value!r}") from None
    if math.isnan(value):
        raise ConfigError(f"{section}.{key} must not be NaN")
    if math.isinf(value) and not allow_inf:
        raise ConfigError(f"{section}.{key} must be finite")
    if minimum is not None:
        if strict and not value > minimum:
            raise ConfigError(f"{section}.{key} must be > {minimum}, got {value}")
        if not strict and not value >= minimum:
            raise ConfigError(f"{section}.{key} must be >= {minimum}, got {value}")
    return value


@dataclass
class RunConfig:
    """Validated, fully resolved settings for a single run."""

    world: WorldConfig
    map_spec: MapSpec
    policy: str
    periods: int
    seed: int
    kernel: KernelParams
    agent: AgentConfig
    sync: SyncSettings
    reward_scale: float
    sigma_gaussian: float
    hypercube_cells: int
    wcs_max_iters: int
    out_dir: str | None
    raw: dict


POLICIES = ("dkucb", "gausskernel", "hypercube", "random", "wcs", "brute")


def build_run_config(cfg: dict, *, policy=None, seed=None, out_dir=None) -> RunConfig:
    """Validate a merged configuration dict and resolve derived settings."""
    cfg = copy.deepcopy(cfg)
    if policy is not None:
        cfg["run"]["policy"] = policy
    if seed is not None:
        cfg["run"]["seed"] = seed
    if out_dir is not None:
        cfg["run"]["out_dir"] = str(out_dir)

    run = cfg["run"]
    if run["policy"] not in POLICIES:
        raise ConfigError(
            f"run.policy must be one of {', '.join(POLICIES)}, got {run['policy']!r}"
        )
    try:
        periods = int(run["periods"])
    except (TypeError, ValueError):
        raise ConfigError(f"run.periods must be an integer, got {run['periods']!r}") from None
    if periods < 1:
        raise ConfigError(f"run.periods must be >= 1, got {periods}")
    try:
        seed_val = int(run["seed"])
    except (TypeError, ValueError):
        raise ConfigError(f"run.seed must be an integer, got {run['seed']!r}") from None

    w = cfg["world"]
    try:
        world = WorldConfig(
            delta_t=_as_float(cfg, "world", "delta_t", minimum=0, strict=True),
            arrival_rate=_as_float(cfg, "world", "arrival_rate", minimum=0),
            speed_min_kmh=_as_float(cfg, "world", "speed_min_kmh", minimum=0),
            speed_max_kmh=_as_float(cfg, "world", "speed_max_kmh", minimum=0),
            carrier_freq_hz=_as_float(cfg, "world", "carrier_freq_hz", minimum=0, strict=True),
            bandwidth_hz=_as_float(cfg, "world", "bandwidth_hz", minimum=0, strict=True),
            tx_power_w=_as_float(cfg, "world", "tx_power_w", minimum=0, strict=True),
            noise_density_w_per_hz=_as_float(
                cfg, "world", "noise_density_w_per_hz", minimum=0, strict=True
            ),
            mainlobe_gain_db=_as_float(cfg, "world", "mainlobe_gain_db"),
            sidelobe_rel_db=_as_float(cfg, "world", "sidelobe_rel_db"),
            pathloss_exp_los=_as_float(cfg, "world", "pathloss_exp_los", minimum=0, strict=True),
            pathloss_exp_nlos=_as_float(cfg, "world", "pathloss_exp_nlos", minimum=0, strict=True),
            nlos_extra_loss_db=_as_float(cfg, "world", "nlos_extra_loss_db", minimum=0),
            rician_k_db=_as_float(cfg, "world", "rician_k_db"),
            doppler_corr_scale=_as_float(cfg, "world", "doppler_corr_scale", minimum=0),
            ref_dist_m=_as_float(cfg, "world", "ref_dist_m", minimum=0, strict=True),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"world: {exc}") from None
    if world.speed_min_kmh > world.speed_max_kmh:
        raise ConfigError("world.speed_min_kmh must be <= world.speed_max_kmh")

    if w["geometry_file"]:
        try:
            map_spec = parse_geometry_file(w["geometry_file"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"world.geometry_file: {exc}") from None
    else:
        map_spec = default_map()

    try:
        kernel = KernelParams(
            sigma_dist=_as_float(cfg, "kernel", "sigma_dist", minimum=0, strict=True),
            sigma_doppler=_as_float(cfg, "kernel", "sigma_doppler", minimum=0, strict=True),
            sigma_ntx=_as_float(cfg, "kernel", "sigma_ntx", minimum=0, strict=True),
            ridge_lambda=_as_float(cfg, "kernel", "ridge_lambda", minimum=0, strict=True),
            jitter=_as_float(cfg, "kernel", "jitter", minimum=0),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"kernel: {exc}") from None

    a = cfg["agent"]
    optional = {}
    for name in ("theta_norm", "noise_scale", "delta"):
        optional[name] = None if a[name] is None else _as_float(cfg, "agent", name)
    horizon = a["horizon"]
    if horizon is not None:
        try:
            horizon = int(horizon)
        except (TypeError, ValueError):
            raise ConfigError(f"agent.horizon must be an integer, got {horizon!r}") from None
    try:
        agent = AgentConfig(
            alpha=_as_float(cfg, "agent", "alpha", minimum=0),
            r_max=_as_float(cfg, "agent", "r_max_m", minimum=0, strict=True, allow_inf=True),
            alpha_mode=str(a["alpha_mode"]),
            horizon=horizon,
            **optional,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"agent: {exc}") from None

    reward_scale = a["reward_scale"]
    if reward_scale == "bandwidth":
        reward_scale = world.bandwidth_hz
    else:
        reward_scale = _as_float(cfg, "agent", "reward_scale", minimum=0, strict=True)

    capacity = cfg["sync"]["bs_cell_capacity"]
    if capacity is not None:
        try:
            capacity = int(capacity)
        except (TypeError, ValueError):
            raise ConfigError(
                f"sync.bs_cell_capacity must be an integer or null, got {capacity!r}"
            ) from None
    try:
        sync = SyncSettings(
            threshold=_as_float(cfg, "sync", "trigger_threshold", minimum=0, allow_inf=True),
            radius=_as_float(
                cfg, "sync", "subspace_radius_m", minimum=0, strict=True, allow_inf=True
            ),
            mode=str(cfg["sync"]["trigger_mode"]),
            bs_cell_size=_as_float(cfg, "sync", "bs_cell_size_m", minimum=0, strict=True),
            bs_cell_capacity=capacity,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"sync: {exc}") from None
    if sync.mode not in ("ratio_to_new", "gain_since_sync"):
        raise ConfigError("sync.trigger_mode must be ratio_to_new or gain_since_sync")

    b = cfg["baselines"]
    try:
        cells = int(b["hypercube_cells"])
    except (TypeError, ValueError):
        raise ConfigError(
            f"baselines.hypercube_cells must be an integer, got {b['hypercube_cells']!r}"
        ) from None
    if cells < 1:
        raise ConfigError("baselines.hypercube_cells must be >= 1")
    try:
        wcs_iters = int(b["wcs_max_iters"])
    except (TypeError, ValueError):
        raise ConfigError(
            f"baselines.wcs_max_iters must be an integer, got {b['wcs_max_iters']!r}"
        ) from None
    if wcs_iters < 1:
        raise ConfigError("baselines.wcs_max_iters must be >= 1")

    return RunConfig(
        world=world,
        map_spec=map_spec,
        policy=str(run["policy"]),
        periods=periods,
        seed=seed_val,
        kernel=kernel,
        agent=agent,
        sync=sync,
        reward_scale=reward_scale,
        sigma_gaussian=_as_float(cfg, "baselines", "sigma_gaussian", minimum=0, strict=True),
        hypercube_cells=cells,
        wcs_max_iters=wcs_iters,
        out_dir=run["out_dir"],
        raw=cfg,
    )


def build_policy(cfg: RunConfig, rng: np.random.Generator) -> Policy:
    if cfg.policy == "dkucb":
        return DkUcbPolicy(cfg.kernel, cfg.agent, cfg.sync, reward_scale=cfg.reward_scale)
    if cfg.policy == "gausskernel":
        return GaussianKernelPolicy(
            cfg.kernel, cfg.agent, cfg.sync,
            reward_scale=cfg.reward_scale, sigma=cfg.sigma_gaussian,
        )
    if cfg.policy == "hypercube":
        doppler_range = (cfg.world.speed_max_kmh / 3.6) / cfg.world.wavelength
        return HypercubeUcbPolicy(
            cells_per_dim=cfg.hypercube_cells,
            dist_range=cfg.agent.r_max if math.isfinite(cfg.agent.r_max) else 1500.0,
            doppler_range=max(doppler_range, 1.0),
            reward_scale=cfg.reward_scale,
        )
    if cfg.policy == "random":
        return RandomPolicy(rng)
    if cfg.policy == "wcs":
        return WcsPolicy(max_iters=cfg.wcs_max_iters)
    if cfg.policy == "brute":
        return BruteForcePolicy()
    raise ConfigError(f"unknown policy {cfg.policy!r}")


CSV_COLUMNS = (
    "period",
    "vehicle",
    "bs",
    "rate_bps",
    "best_bs",
    "best_rate_bps",
    "synced",
    "items_up",
    "items_down",
    "items_pool",
)


class MetricsLog:
    """Per-period, per-vehicle outcome rows plus derived aggregates."""

    def __init__(self, periods: int):
        self.periods = periods
        self.rows: list[tuple] = []

    def add(self, period, vehicle, bs, rate, best_bs, best_rate, synced, up, down, pool):
        self.rows.append(
            (period, vehicle, bs, rate, best_bs, best_rate, synced, up, down, pool)
        )

    def regret_series(self) -> np.ndarray:
        """Cumulative regret (bits/s gap summed over vehicles) per period."""
        out = np.zeros(self.periods + 1)
        for row in self.rows:
            out[row[0]] += row[5] - row[3]
        return np.cumsum(out)[1:]

    def aggregates(self) -> dict:
        rows = self.rows
        n = len(rows)
        regret = sum(r[5] - r[3] for r in rows)
        total_rate = sum(r[3] for r in rows)
        synced = sum(r[6] for r in rows)
        up = sum(r[7] for r in rows)
        down = sum(r[8] for r in rows)
        pool = sum(r[9] for r in rows)
        eff_terms = [1.0 - r[8] / r[9] for r in rows if r[6] and r[9] > 0]
        return {
            "vehicle_periods": n,
            "cumulative_regret_bps": regret,
            "avg_rate_bps": total_rate / n if n else 0.0,
            "sync_rate": synced / n if n else 0.0,
            "syncs_total": synced,
            "items_uploaded": up,
            "items_downloaded": down,
            "items_pool_total": pool,
            "items_skipped": pool - down,
            "bytes_uploaded": up * ITEM_SCALARS * BYTES_PER_SCALAR,
            "bytes_downloaded": down * ITEM_SCALARS * BYTES_PER_SCALAR,
            "sharing_efficiency": (sum(eff_terms) / len(eff_terms)) if eff_terms else None,
        }

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for row in self.rows:
                writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def sharing_efficiency(ledger) -> float | None:
    """Mean over synchronizations of the subspace-filtered pool fraction.

    1 - downloaded/pool per synchronization with a nonempty pool; None when
    no such synchronization happened.
    """
    terms = [
        1.0 - rec.downloaded / rec.pool_size
        for rec in ledger.sync_records
        if rec.pool_size > 0
    ]
    if not terms:
        return None
    return sum(terms) / len(terms)


@dataclass
class RunResult:
    cfg: RunConfig
    log: MetricsLog
    summary: dict
    ledger: object | None


def _sanitize(value):
    """Make a config echo strictly JSON-serializable (inf -> 'inf')."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return value


def run(cfg: RunConfig) -> RunResult:
    """Execute one seeded run and (optionally) write its CSV/JSON outputs."""
    root = np.random.SeedSequence(cfg.seed)
    world_seq, policy_seq = root.spawn(2)
    world = World(cfg.world, cfg.map_spec, seed=world_seq)
    policy = build_policy(cfg, np.random.default_rng(policy_seq))
    log = MetricsLog(cfg.periods)

    for _ in range(cfg.periods):
        t = world.advance()
        obs = world.observe(cfg.agent.r_max)
        assoc = policy.select(obs)
        world.commit(assoc, obs)
        rates, best = world.evaluate(assoc, obs)
        contexts = {
            vid: next(c for c in obs.candidates[vid] if c.arm == assoc[vid])
            for vid in assoc
        }
        fb = PeriodFeedback(
            period=t,
            assoc=assoc,
            contexts=contexts,
            rewards=rates,
            active_ids=obs.active_ids,
            stations=world.stations,
        )
        outcomes = policy.feedback(fb)
        world.remember_loads(assoc)
        for vid in sorted(assoc):
            sync = outcomes.get(vid)
            log.add(
                t,
                vid,
                assoc[vid],
                rates[vid],
                best[vid][0],
                best[vid][1],
                1 if sync else 0,
                sync.uploaded if sync else 0,
                sync.downloaded if sync else 0,
                sync.pool_size if sync else 0,
            )

    summary = {
        "policy": cfg.policy,
        "seed": cfg.seed,
        "periods": cfg.periods,
        **log.aggregates(),
        "config": _sanitize(cfg.raw),
    }
    ledger = getattr(policy, "ledger", None)
    if cfg.out_dir:
        os.makedirs(cfg.out_dir, exist_ok=True)
        log.write_csv(os.path.join(cfg.out_dir, "metrics.csv"))
        with open(os.path.join(cfg.out_dir, "summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return RunResult(cfg, log, summary, ledger)


# -- sweeps -------------------------------------------------------------------


def set_config_value(cfg: dict, axis: str, value):
    """Assign a dotted 'section.key' path in a configuration dict."""
    parts = axis.split(".")
    if len(parts) != 2:
        raise ConfigError(f"sweep axis must look like 'section.key', got {axis!r}")
    section, key = parts
    if section not in cfg or key not in cfg[section]:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    cfg[section][key] = value


def sweep(base_cfg: dict, axis: str, values, seeds=None) -> list[dict]:
    """One run per (value, seed) with everything else pinned.

    Returns one aggregate row per run; the same seed list is reused across
    values so that comparisons along the axis are paired.
    """
    rows = []
    if seeds is None:
        seeds = [int(base_cfg["run"]["seed"])]
    for value in values:
        cfg_dict = copy.deepcopy(base_cfg)
        set_config_value(cfg_dict, axis, value)
        for seed in seeds:
            rc = build_run_config(cfg_dict, seed=seed)
            result = run(rc)
            row = {"axis": axis, "value": value, "seed": seed, "policy": rc.policy}
            row.update(result.log.aggregates())
            rows.append(row)
    return rows


def trend_metrics(cfg_dict: dict, policy: str, seed: int, checkpoints=()) -> dict:
    """Flat, picklable run outcome used by parallel experiment drivers."""
    rc = build_run_config(cfg_dict, policy=policy, seed=seed)
    result = run(rc)
    series = result.log.regret_series()
    out = {
        "policy": policy,
        "seed": seed,
        "aggregates": result.log.aggregates(),
        "regret_at": {int(t): float(series[t - 1]) for t in checkpoints if t <= len(series)},
    }
    return out
