"""Command-line entry point.

    chimhd run <config>                      run one scenario
    chimhd sweep <config> --eps ... --eps-ref ...   width-convergence sweep
    chimhd check                             invariant self-test battery

Exit codes: 0 ok, 1 configuration error, 2 solver failure, 3 invariant
breach.  CHIMHD_OUTPUT_ROOT prefixes relative output directories.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import ConfigError, InvariantError, SolverError
from .runner import run, sweep_epsilon
from .selfcheck import run_battery

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_INVARIANT = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chimhd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config")

    p_sweep = sub.add_parser("sweep", help="interface-width convergence sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument(
        "--eps", required=True,
        help="comma-separated decreasing interface widths, e.g. 0.1,0.05,0.025",
    )
    p_sweep.add_argument("--eps-ref", required=True, type=float,
                         help="reference width (must be below every swept width)")

    sub.add_parser("check", help="run the invariant self-test battery")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(parse_config(args.config))
        if args.command == "sweep":
            try:
                eps_list = [float(tok) for tok in args.eps.split(",") if tok.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad --eps list: {exc}") from None
            table = sweep_epsilon(parse_config(args.config), eps_list, args.eps_ref)
            print("eps      hausdorff_to_ref")
            for eps, dist in table:
                print(f"{eps:<8g} {dist:.6e}")
            return EXIT_OK
        if args.command == "check":
            return EXIT_OK if run_battery() else EXIT_INVARIANT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvariantError as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
