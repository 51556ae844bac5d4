"""Command-line front end: single runs and parameter sweeps."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

from .harness import (
    ConfigError,
    build_run_config,
    load_config,
    run,
    set_config_value,
    sweep,
)


def _parse_value(token: str):
    """Sweep value: float (inf accepted) when possible, else the raw string."""
    low = token.strip()
    if low.lower() in ("inf", "+inf", ".inf", "infinity"):
        return math.inf
    try:
        return float(low)
    except ValueError:
        return low


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    rc = build_run_config(cfg, policy=args.policy, seed=args.seed, out_dir=args.out)
    result = run(rc)
    agg = result.log.aggregates()
    print(f"policy={rc.policy} seed={rc.seed} periods={rc.periods}")
    print(f"cumulative_regret_bps={agg['cumulative_regret_bps']:.6g}")
    print(f"avg_rate_bps={agg['avg_rate_bps']:.6g}")
    print(f"sync_rate={agg['sync_rate']:.4f}")
    eff = agg["sharing_efficiency"]
    print(f"sharing_efficiency={'n/a' if eff is None else format(eff, '.4f')}")
    if rc.out_dir:
        print(f"wrote {os.path.join(rc.out_dir, 'metrics.csv')}")
        print(f"wrote {os.path.join(rc.out_dir, 'summary.json')}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = [_parse_value(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        raise ConfigError("sweep needs at least one value")
    # fail fast on a bad axis before running anything
    set_config_value(json.loads(json.dumps(cfg, default=str)), args.axis, values[0])
    seeds = None
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",") if s.strip() != ""]
    rows = sweep(cfg, args.axis, values, seeds=seeds)

    columns = [
        "axis", "value", "seed", "policy", "cumulative_regret_bps", "avg_rate_bps",
        "sync_rate", "sharing_efficiency", "items_uploaded", "items_downloaded",
    ]
    header = " ".join(f"{c:>22s}" for c in columns[1:])
    print(f"sweep over {args.axis}")
    print(header)
    for row in rows:
        cells = []
        for c in columns[1:]:
            v = row.get(c)
            if v is None:
                cells.append(f"{'n/a':>22s}")
            elif isinstance(v, float):
                cells.append(f"{v:>22.6g}")
            else:
                cells.append(f"{str(v):>22s}")
        print(" ".join(cells))

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        csv_path = os.path.join(args.out, "sweep.csv")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=sorted(rows[0]), extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(
                    {k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                     for k, v in row.items()}
                )
        json_path = os.path.join(args.out, "sweep.json")
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(
                [{k: ("inf" if isinstance(v, float) and math.isinf(v) else v)
                  for k, v in row.items()} for row in rows],
                fh, sort_keys=True, indent=2,
            )
            fh.write("\n")
        print(f"wrote {csv_path}")
        print(f"wrote {json_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dkucb",
        description="Kernelized-bandit user association simulator for mmWave vehicular networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute one seeded run")
    p_run.add_argument("--config", required=True, help="YAML configuration file")
    p_run.add_argument("--policy", default=None, help="override run.policy")
    p_run.add_argument("--seed", type=int, default=None, help="override run.seed")
    p_run.add_argument("--out", default=None, help="directory for metrics.csv / summary.json")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="rerun one config varying a single parameter")
    p_sweep.add_argument("--config", required=True, help="YAML configuration file")
    p_sweep.add_argument("--axis", required=True, help="dotted parameter, e.g. sync.trigger_threshold")
    p_sweep.add_argument("--values", required=True, help="comma-separated values (inf accepted)")
    p_sweep.add_argument("--seeds", default=None, help="comma-separated seeds (default: run.seed)")
    p_sweep.add_argument("--out", default=None, help="directory for sweep.csv / sweep.json")
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
