"""Command-line entry point: one subcommand per scenario.

Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 truncation ceiling.
"""
from __future__ import annotations

import argparse
import sys

from .experiments import (CeilingError, ConfigError, InvariantFailure,
                          load_config, run_classical_growth,
                          run_crossover_scan, run_echo_ladder, run_growth,
                          run_integrable_inset, scenario_names)
from .validate import run_validate

_RUNNERS = {
    "growth": run_growth,
    "echo_ladder": run_echo_ladder,
    "crossover_scan": run_crossover_scan,
    "integrable_inset": run_integrable_inset,
    "classical_growth": run_classical_growth,
    "validate": run_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wigharm",
        description="Kicked quartic oscillator: harmonic complexity, echo "
                    "reversibility, classical ensembles.")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in scenario_names():
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("--config", default=None,
                       help="TOML config file (defaults are built in)")
        p.add_argument("--out", default=f"runs/{name}",
                       help="output directory")
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--threads", type=int, default=1,
                       help="parallel scenario points")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.scenario, args.config)
        runner = _RUNNERS[args.scenario]
        manifest = runner(cfg, args.out, args.seed, threads=args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CeilingError as exc:
        print(f"truncation ceiling: {exc}", file=sys.stderr)
        return 3
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return 1

    if args.scenario == "validate":
        for row in manifest["derived"]["checks"]:
            status = "PASS" if row["ok"] else "FAIL"
            print(f"{status} {row['check']}: {row['detail']}")
        if not manifest["ok"]:
            return 1
    print(f"manifest: {manifest['manifest_hash']} "
          f"files: {', '.join(manifest['csv_files'])} "
          f"wall: {manifest['wall_time_s']}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
