"""
gsn-shaper - Command-line entry point

    gsn-shaper <train|sample|verify|export> [flags]

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 missing input, 4 corrupt artifact.
"""
from __future__ import annotations
import argparse
import logging
import sys
from typing import Optional, Sequence

from rich.logging import RichHandler

from gsn_shaper import __version__
from gsn_shaper.commands import export, sample, train, verify
from gsn_shaper.config import get_settings
from gsn_shaper.exceptions import CheckpointError, ConfigError, DataFormatError, DomainError

logger = logging.getLogger("gsn_shaper")

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_CORRUPT = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsn-shaper",
        description="Simple generative stochastic networks with collaborative shaping",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default: $GSN_SHAPER_LOG_LEVEL or INFO)")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in (train, sample, verify, export):
        command.add_parser(subparsers)
    return parser


def configure_logging(level: str):
    handler = RichHandler(show_path=False, rich_tracebacks=True)
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]", handlers=[handler], force=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    configure_logging(args.log_level or get_settings().log_level)

    try:
        return args.handler(args)
    except ConfigError as exc:
        logger.error("Config error%s: %s", f" ({exc.key})" if exc.key else "", exc)
        return EXIT_USAGE
    except DomainError as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        logger.error("Missing input: %s", exc.filename or exc)
        return EXIT_MISSING_INPUT
    except CheckpointError as exc:
        logger.error("Corrupt checkpoint, record %s: %s", exc.record, exc)
        return EXIT_CORRUPT
    except DataFormatError as exc:
        logger.error("Corrupt data file: %s", exc)
        return EXIT_CORRUPT


def cli():
    sys.exit(main())


if __name__ == "__main__":
    cli()
