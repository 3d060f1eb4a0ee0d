"""Command-line front end: ``tunnelmpc {run,bench,field,calibrate-lambda}``.

Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 the ``run``
scenario ended in a collision (logs are still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .aero import effect_field
from .cbf import calibrate_lambda
from .config import load_config
from .exceptions import ConfigError
from .sim import (
    _json_default,
    benchmark_suite,
    config_hash,
    metrics_to_json,
    records_to_csv,
    render_table,
    run_scenario,
)

log = logging.getLogger("tunnelmpc")

EXIT_CONFIG, EXIT_RUNTIME, EXIT_COLLISION = 1, 2, 3


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("TUNNELMPC_OUT") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args):
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(args.config, overrides)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def cmd_run(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    records, metrics = run_scenario(config)
    (out / "records.csv").write_text(records_to_csv(records))
    (out / "metrics.json").write_text(metrics_to_json(metrics, config))
    print(f"T_e={metrics.T_e:.4f} m  c_e={metrics.c_e:.1f}  c_s={metrics.c_s:.1f}  "
          f"violations={metrics.boundary_violations}  collided={metrics.collided}")
    return EXIT_COLLISION if metrics.collided else 0


def cmd_bench(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    seeds = [config.seed + i for i in range(args.seeds)]
    summaries, table = benchmark_suite(config, seeds, jobs=args.jobs)
    text = render_table(table)
    (out / "bench.txt").write_text(text)
    payload = {
        "config_hash": config_hash(config),
        "seeds": seeds,
        "runs": [s.to_dict() for s in summaries],
        "table": {label: {c: list(v) for c, v in row.items()} for label, row in table.items()},
    }
    (out / "bench.json").write_text(_dump(payload))
    sys.stdout.write(text)
    return 0


def cmd_field(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    rows = effect_field(config.geometry, config.uav, config.aero, ny=args.ny, nz=args.nz)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["y", "z", "fx", "fy", "fz"])
    writer.writerows([f"{v:.17g}" for v in row] for row in rows)
    (out / "field.csv").write_text(buf.getvalue())
    print(f"wrote {len(rows)} grid points to {out / 'field.csv'}")
    return 0


def cmd_calibrate_lambda(args) -> int:
    config = _config(args)
    out = _out_dir(args)
    d_m = config.d_m if args.d_m is None else args.d_m
    if d_m < 0:
        raise ConfigError("d_m must be non-negative")
    lam, trace = calibrate_lambda(replace(config.cbf), d_m, episodes=args.episodes, seed=config.seed)
    payload = {"d_m": d_m, "lambda": lam, "trace": [{"lambda": l, "violations": v} for l, v in trace]}
    (out / "calibrate.json").write_text(_dump(payload))
    for l, v in trace:
        print(f"lambda={l:.4f}  violations={v}")
    print(f"calibrated lambda = {lam:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario config (defaults when omitted)")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", help="dotted override, repeatable")
    common.add_argument("--seed", type=int, help="base seed")
    common.add_argument("--out", metavar="DIR", help="output directory (falls back to $TUNNELMPC_OUT, then .)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="tunnelmpc", description="Quadrotor tunnel-flight MPC simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario, write records.csv and metrics.json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="all cases x controllers x seeds")
    p.add_argument("--seeds", type=int, default=3, help="number of consecutive seeds from --seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("field", parents=[common], help="mean aero disturbance over a cross-section")
    p.add_argument("--ny", type=int, default=41)
    p.add_argument("--nz", type=int, default=41)
    p.set_defaults(func=cmd_field)

    p = sub.add_parser("calibrate-lambda", parents=[common], help="smallest violation-free margin for d_m")
    p.add_argument("--d-m", type=float, dest="d_m", help="disturbance bound (default: config d_m)")
    p.add_argument("--episodes", type=int, default=10_000)
    p.set_defaults(func=cmd_calibrate_lambda)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "seeds", 1) < 1 or getattr(args, "jobs", 1) < 1 or getattr(args, "episodes", 1) < 1:
        print("error: --seeds, --jobs and --episodes must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - mapped to the runtime exit code
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
