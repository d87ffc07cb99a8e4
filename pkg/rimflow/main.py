from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional, Sequence

from pydantic import ValidationError

from rimflow import __version__
from rimflow.common.config import expand_config
from rimflow.common.errors import RimflowError
from rimflow.common.logging import configure_logging
from rimflow.common.settings import log_level
from rimflow.evolve.router import register as register_evolve
from rimflow.slowode.router import register as register_slowode
from rimflow.spectrum.router import register as register_spectrum
from rimflow.steady.router import register as register_steady
from rimflow.verify.router import register as register_verify

logger = logging.getLogger("cli")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rimflow",
        description="Pseudospectral laboratory for 3D capillary rimming flow on a rotating cylinder.",
    )
    parser.add_argument("--version", action="version", version=f"rimflow {__version__}")
    sub = parser.add_subparsers(dest="command")
    register_evolve(sub)
    register_steady(sub)
    register_spectrum(sub)
    register_slowode(sub)
    register_verify(sub)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    raw: List[str] = list(sys.argv[1:] if argv is None else argv)
    parser = create_parser()
    try:
        ns = parser.parse_args(expand_config(raw))
    except (ValueError, FileNotFoundError) as e:
        print(f"rimflow: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)

    if not getattr(ns, "handler", None):
        parser.print_help(sys.stderr)
        return 2

    configure_logging("DEBUG" if ns.verbose else log_level())
    logger.debug("command %s with %s", ns.command, vars(ns))
    try:
        return ns.handler(ns)
    except RimflowError as e:
        logger.error("%s failed: %s", ns.command, e)
        print(f"rimflow: numerical failure: {e}", file=sys.stderr)
        return 3
    except (ValidationError, ValueError, FileNotFoundError) as e:
        print(f"rimflow: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
