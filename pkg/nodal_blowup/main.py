#!/usr/bin/env python
"""Command-line entry point of the nbl lab."""

import argparse
import json
import logging
import math
import sys
from typing import List, Optional

from .commands.experiment_commands import EXIT_INTERNAL, EXIT_USAGE, ExperimentCommands, error_document, exit_code_for
from .core.config import config
from .core.nonlinearity import Family

logger = logging.getLogger("nodal_blowup.main")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class NblArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; nbl reserves 2 for a failed bracket."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "UsageError", "message": message, "details": {}}) + "\n")
        sys.exit(1)


def eps_list(text: str) -> List[float]:
    """Comma-separated eps values, e.g. 0.8,0.5,0.3"""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0, help="linear coefficient, 0 < lambda < lambda_1")
    parser.add_argument("--family", choices=[f.value for f in Family], default=Family.MT_PLUS.value)
    parser.add_argument("--tol", type=float, default=None, help="integrator tolerance")
    parser.add_argument("--boundary-tol", dest="boundary_tol", type=float, default=None)
    parser.add_argument("--out", default=None, help="output path (stdout when omitted)")
    parser.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = NblArgumentParser(prog="nbl", description="Nodal blow-up lab for the Moser-Trudinger critical problem")
    subparsers = parser.add_subparsers(dest="command", parser_class=NblArgumentParser)
    subparsers.required = True

    solve = subparsers.add_parser("solve", help="solve one radial nodal problem")
    _add_common(solve)
    solve.add_argument("--eps", type=float, default=None)
    solve.add_argument("--k", type=int, default=1, help="number of interior zeros; 0 solves the ground problem")
    solve.add_argument("--rho-max", dest="rho_max", type=float, default=5.0)
    solve.add_argument("--samples", type=int, default=200)

    ground = subparsers.add_parser("ground", help="solve the eps = 0 ground problem")
    _add_common(ground)

    sweep = subparsers.add_parser("sweep", help="solve along a decreasing eps list")
    _add_common(sweep)
    sweep.add_argument("--eps-list", dest="eps_list", type=eps_list, required=True)
    sweep.add_argument("--k", type=int, default=1)
    sweep.add_argument("--rho-max", dest="rho_max", type=float, default=5.0)
    sweep.add_argument("--samples", type=int, default=200)
    sweep.add_argument("--format", choices=["csv", "json"], default="csv")

    moser = subparsers.add_parser("moser", help="assemble the projected Moser test function")
    _add_common(moser)
    moser.add_argument("--eps", type=float, default=None)
    moser.add_argument("--k", type=int, default=1)
    moser.add_argument("--log-R", dest="log_R", type=float, default=math.log(0.1), help="log of the outermost radius R_k")
    moser.add_argument("--compare", action="store_true", help="also solve and compare with the nodal energy")

    verify = subparsers.add_parser("verify", help="run the verification suite")
    verify.add_argument("--trends", action="store_true", help="include the eps-sweep trend checks")
    verify.add_argument("--out", default=None)
    verify.add_argument("--verbose", "-v", action="store_true")
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else getattr(logging, config.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    commands = ExperimentCommands()
    try:
        return getattr(commands, f"cmd_{args.command}")(args)
    except Exception as e:
        code = exit_code_for(e)
        if code == EXIT_INTERNAL:
            logger.exception(f"{args.command} failed with an internal error: {e}")
        elif code == EXIT_USAGE:
            logger.debug(f"{args.command} rejected its input: {e}")
        else:
            logger.error(f"{args.command} failed: {e}")
        sys.stderr.write(json.dumps(error_document(e), default=str) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
