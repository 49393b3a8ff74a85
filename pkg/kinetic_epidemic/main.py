#!/usr/bin/env python3
"""
Command-line entry point.

    kinetic-epidemic run --preset test1 --preset-arg beta_tilde=8 --out out/t1
    kinetic-epidemic run --scenario scenario.json --set time.t_end=5
    kinetic-epidemic converge --chi 1 2 4 --regime kinetic
    kinetic-epidemic ap-check --tau 1e-2 1e-4 1e-6
    kinetic-epidemic mesh-info --preset emilia

Exit codes: 0 success, 2 argument or configuration error, 1 any other
failure. Failures print one JSON error line on stderr.
"""

import argparse
import json
import os
import platform
import sys

from . import __version__

THREAD_VARIABLES = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
USAGE_CATEGORIES = ("argument", "configuration")


def _scenario_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="scenario JSON file")
    parser.add_argument("--preset", help="built-in scenario (test1, test2, emilia, convergence)")
    parser.add_argument("--preset-arg", action="append", default=[], metavar="KEY=VALUE",
                        help="preset argument, repeatable")
    parser.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                        help="scenario override, repeatable")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, help="threads of the numerical libraries")
    parser.add_argument("--cfl", type=float, help="shorthand for --set time.cfl=X")
    parser.add_argument("--ordinates", type=int, help="velocity nodes per quadrant")
    parser.add_argument("--dump-scenario", metavar="PATH", help="write the resolved scenario document")
    parser.add_argument("--debug", action="store_true", help="enable debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kinetic-epidemic", description="Multiscale kinetic epidemic simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario")
    _scenario_options(run)

    converge = sub.add_parser("converge", help="self-convergence study")
    _scenario_options(converge)
    converge.add_argument("--chi", type=int, nargs="+", help="ascending refinement factors (default 1 2 4)")
    converge.add_argument("--regime", nargs="+", help="kinetic, intermediate, diffusive (default all)")
    converge.add_argument("--self-test", action="store_true", help="also run the linear advection self-test")

    ap = sub.add_parser("ap-check", help="diffusion-limit check")
    _scenario_options(ap)
    ap.add_argument("--tau", type=float, nargs="+", help="relaxation times (default 1e-2 1e-4 1e-6 1e-8)")
    ap.add_argument("--diffusion", type=float, help="fixed D = lambda² tau / 2 (default 0.5)")

    info = sub.add_parser("mesh-info", help="mesh figures")
    _scenario_options(info)
    info.add_argument("--mesh", help="MESH2D file instead of a scenario")
    return parser


def _arguments(args: argparse.Namespace) -> dict:
    skip = {"command", "debug"}
    out = {}
    for key, value in vars(args).items():
        if key in skip or value is None or value == [] or value is False:
            continue
        out[key] = value
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)

    if args.threads:
        # must precede the first numpy import
        for name in THREAD_VARIABLES:
            os.environ[name] = str(args.threads)

    from .logger import configure_logging, get_logger

    configure_logging("DEBUG" if args.debug else None)
    logger = get_logger("KineticEpidemic.CLI")

    logger.info("=" * 50)
    logger.info(f"kinetic-epidemic {__version__}")
    logger.info(f"Python {platform.python_version()} ({sys.executable})")
    logger.info(f"Working directory: {os.getcwd()}")
    logger.info(f"Command: {args.command}")
    logger.info("=" * 50)

    from .harness.commands import commands

    result = commands.execute(args.command.replace("-", "_"), _arguments(args))
    if result.get("ok"):
        print(json.dumps(result["result"], default=str))
        return 0
    error = result["error"]
    print(json.dumps(error, default=str), file=sys.stderr)
    return 2 if error.get("category") in USAGE_CATEGORIES else 1


if __name__ == "__main__":
    sys.exit(main())
