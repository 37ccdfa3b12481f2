"""Command-line interface.

Four verbs: ``estimate`` fits the configured estimator inventory on a
CSV panel, ``simulate`` draws a synthetic panel from a spec, ``mc``
replays a spec under the Monte-Carlo harness, and ``diagnose`` prints
per-variable cross-section dependence statistics and factor counts.

Exit codes: 0 success, 1 at least one estimator failed, 2 bad
configuration or IO.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, PanelError
from .runner import EXIT_CONFIG, run_diagnose, run_estimate, run_mc, run_simulate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panelfx",
        description="Panel estimators robust to unobserved heterogeneity, "
                    "with dependence diagnostics and a simulation harness.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="fit estimators on a CSV panel per a TOML config")
    p.add_argument("config", help="TOML file with [data] and optional [run] tables")

    p = sub.add_parser("simulate", help="draw one synthetic panel from a TOML spec")
    p.add_argument("spec", help="TOML file with a [dgp] table")
    p.add_argument("-o", "--output", required=True, help="CSV path for the panel")
    p.add_argument("--truth", help="optional JSON path for the ground truth")

    p = sub.add_parser("mc", help="run a Monte-Carlo study of the estimators")
    p.add_argument("spec", help="TOML file with a [dgp] table")
    p.add_argument("config", help="TOML file with an [mc] table (reps, seed, ...)")

    p = sub.add_parser("diagnose", help="cross-section dependence report for a CSV panel")
    p.add_argument("csv", help="long-format CSV panel")
    p.add_argument("--unit", default="unit", help="unit id column (default: unit)")
    p.add_argument("--time", default="time", help="time id column (default: time)")
    p.add_argument("--y", default="y", help="outcome column (default: y)")
    p.add_argument("--x", nargs="*", default=None,
                   help="regressor columns (default: every other column)")
    p.add_argument("-o", "--output", default=None, help="optional CSV path for the table")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "estimate":
            return run_estimate(args.config)
        if args.command == "simulate":
            return run_simulate(args.spec, args.output, truth_path=args.truth)
        if args.command == "mc":
            return run_mc(args.spec, args.config)
        return run_diagnose(args.csv, unit=args.unit, time=args.time,
                            y=args.y, x=args.x, output=args.output)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PanelError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
