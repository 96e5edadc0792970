"""Command-line entry point.

    pdlearn verify [--suite NAME] [--out DIR] [--inject-fault NAME]
    pdlearn train  --config PATH --out DIR [--no-figures]
    pdlearn bounds --config PATH --out DIR [--no-figures]

Exit codes: 0 success, 1 verification failure, 2 config error,
3 numerical failure.  PDLEARN_THREADS caps the worker threads used by
the Monte Carlo concentration check.
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import ConfigError, NumericalError, PdlearnError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdlearn",
        description="Distribution-learning loss geometry, training "
                    "diagnostics, and bound verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the property suites")
    p_verify.add_argument("--suite", default=None,
                          help="run only the named suite")
    p_verify.add_argument("--out", default=".",
                          help="directory for verify_summary.json")
    p_verify.add_argument("--inject-fault", default=None, dest="fault",
                          help="negative-control fault name (testing only)")

    p_train = sub.add_parser("train", help="run a training experiment")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--no-figures", action="store_true")

    p_bounds = sub.add_parser("bounds", help="write a bound report")
    p_bounds.add_argument("--config", required=True)
    p_bounds.add_argument("--out", required=True)
    p_bounds.add_argument("--no-figures", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return harness.cmd_verify(suite=args.suite, out_dir=args.out,
                                      fault=args.fault)
        if args.command == "train":
            return harness.cmd_train(args.config, args.out,
                                     figures=not args.no_figures)
        if args.command == "bounds":
            return harness.cmd_bounds(args.config, args.out,
                                      figures=not args.no_figures)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return harness.EXIT_NUMERICAL
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except PdlearnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return harness.EXIT_NUMERICAL
    return harness.EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
