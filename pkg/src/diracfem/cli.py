"""Command line entry point: ``diracfem <study> [options]``.

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 threshold violation under ``--check``.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .harness import (STUDIES, ConfigError, ExperimentConfig, check_reports, coerce, load_config,
                      reports_to_csv, run_study)
from .solver import SolverError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diracfem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="study", required=True)
    for name in STUDIES:
        q = sub.add_parser(name)
        q.add_argument("--config", help="flat key = value file")
        q.add_argument("--h-min", help="finest mesh size, e.g. 2^-7")
        q.add_argument("--h-max", help="coarsest mesh size, e.g. 2^-4")
        q.add_argument("--s", help="comma-separated density smoothness values")
        q.add_argument("--htilde-ratio", help="target htilde / h")
        q.add_argument("--seed", help="RNG seed for random fields")
        q.add_argument("--no-timing", action="store_true", help="write wall_ms = 0")
        q.add_argument("--out", help="CSV path; '-' for stdout")
        q.add_argument("--check", action="store_true", help="exit 4 if thresholds fail")
        q.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for key, flag in (("h_min", args.h_min), ("h_max", args.h_max), ("s", args.s),
                      ("htilde_ratio", args.htilde_ratio), ("seed", args.seed)):
        if flag is not None:
            overrides[key] = coerce(key, flag)
    if args.out is not None:
        overrides["out"] = args.out
    if args.no_timing:
        overrides["timing"] = False
    if args.htilde_ratio is not None:
        overrides["htilde_rule"] = "ratio"
    if args.config:
        cfg = load_config(args.config)
        if cfg.study != args.study:
            cfg = dataclasses.replace(cfg, study=args.study)
        return dataclasses.replace(cfg, **overrides)
    return ExperimentConfig(study=args.study, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        reports = run_study(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    text = reports_to_csv(reports)
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)

    if any(rep.failed for rep in reports):
        return EXIT_SOLVER
    if args.check:
        bad = check_reports(cfg, reports)
        for msg in bad:
            print(f"check failed: {msg}", file=sys.stderr)
        if bad:
            return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
