"""Command line front end: ``mfgs-lha run|validate|oracle <config>``.

Exit codes: 0 success, 1 configuration error, 2 a sweep point hit a
stability hard error, 3 a numeric or grid convergence failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import load_config
from .errors import ConfigError
from .runner import EXIT_CONFIG, run_scenario, write_outputs

__all__ = ["main", "build_parser"]


def build_parser():
    p = argparse.ArgumentParser(prog="mfgs-lha", description="Local harmonic mean force Gibbs state calculations.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="evaluate a scenario sweep and write CSV plus manifest")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory (default: scenario.output)")
    run.add_argument("--n-terms", type=int, default=None, help="Matsubara truncation N")
    run.add_argument("--grid-points", type=int, default=None, help="number of q-grid points")
    run.add_argument("--workers", type=int, default=None, help="process pool size")
    val = sub.add_parser("validate", help="check a configuration file")
    val.add_argument("config")
    orc = sub.add_parser("oracle", help="write only the zero-coupling and classical reference rows")
    orc.add_argument("config")
    orc.add_argument("--out", default=None)
    return p


def _load(path, args):
    cfg = load_config(path)
    changes = {}
    problems = []
    if getattr(args, "n_terms", None) is not None:
        if args.n_terms < 100:
            problems.append(("--n-terms", "must be >= 100"))
        changes["n_terms"] = args.n_terms
    if getattr(args, "grid_points", None) is not None:
        if args.grid_points < 101:
            problems.append(("--grid-points", "must be >= 101"))
        changes["n_q"] = args.grid_points
    if getattr(args, "workers", None) is not None and args.workers < 1:
        problems.append(("--workers", "must be >= 1"))
    if problems:
        raise ConfigError(problems)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args.config, args)
    except ConfigError as exc:
        for field, msg in exc.problems:
            print(f"config error: {field}: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: valid {cfg.scenario} configuration ({len(cfg.sweep_values)} sweep points)")
        return 0
    oracle_only = args.command == "oracle"
    result = run_scenario(cfg, workers=getattr(args, "workers", None), oracle_only=oracle_only)
    out = args.out or cfg.output
    stem = f"{cfg.scenario}.oracle" if oracle_only else None
    csv_path, man_path = write_outputs(cfg, result, out, stem)
    print(f"wrote {csv_path}")
    print(f"wrote {man_path}")
    for f in result.manifest.get("failures", []):
        print(f"warning: {f}", file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
