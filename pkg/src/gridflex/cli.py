"""Command-line entry point.

    gridflex run <study> [--config FILE] [--out DIR] [--gap G]
                 [--time-limit S] [--seed N] [--external-solver CMD]
    gridflex validate --config FILE

Exit codes: 0 all cells solved, 1 configuration error, 2 some cells failed.
"""

from __future__ import annotations

import argparse
import sys

from .study import RUNNERS, STUDIES, ConfigError, StudyConfig, emit_reports


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridflex",
        description="Stochastic unit commitment studies with variable-impedance "
                    "power flow control on the modified RTS-96 system.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a study and write reports")
    run.add_argument("study", choices=STUDIES + ("all",))
    run.add_argument("--config", help="StudyConfig JSON file")
    run.add_argument("--out", default="gridflex-out", help="output directory")
    run.add_argument("--gap", type=float, help="relative MIP gap override")
    run.add_argument("--time-limit", type=float, help="per-solve seconds")
    run.add_argument("--seed", type=int, help="solver seed override")
    run.add_argument("--workers", type=int, help="concurrent cells")
    run.add_argument("--external-solver",
                     help="command template with {mps} and {sol} placeholders; "
                          "routes solves through MPS export/import")
    run.add_argument("--no-audit", action="store_true",
                     help="skip the per-cell feasibility audit")

    val = sub.add_parser("validate", help="check a config file and exit")
    val.add_argument("--config", required=True)
    return parser


def _load_config(args) -> StudyConfig:
    config = StudyConfig.from_json(args.config) if args.config else StudyConfig()
    if getattr(args, "gap", None) is not None:
        config.mip_gap = args.gap
    if getattr(args, "time_limit", None) is not None:
        config.time_limit_s = args.time_limit
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    if getattr(args, "external_solver", None):
        config.external_solver = args.external_solver
    if getattr(args, "no_audit", False):
        config.audit = False
    return config


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        problems = config.validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 1
    if args.command == "validate":
        print("config ok")
        return 0

    studies = list(STUDIES) if args.study == "all" else [args.study]
    failed = 0
    for study in studies:
        out_dir = f"{args.out}/{study}" if len(studies) > 1 else args.out
        report = RUNNERS[study](config, out_dir=out_dir)
        emit_reports(report, out_dir)
        n_bad = sum(0 if c.solved else 1 for c in report.cells)
        failed += n_bad
        print(f"{study}: {len(report.cells)} cells, "
              f"{len(report.cells) - n_bad} solved, {n_bad} failed -> {out_dir}")
    return 2 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
