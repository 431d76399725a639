"""Command-line application factory and configuration."""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional, Type

from pydantic import ValidationError

from spellforge.commands.routes import include_commands
from spellforge.config import settings
from spellforge.errors import SpellforgeError
from spellforge.models import ErrorReport

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


def configure_logging(level: str) -> None:
    """Root handler on stderr; replaces handlers from an earlier call."""
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level.upper())


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=default(None), help="Master seed (default from settings)")
    parser.add_argument(
        "--threads",
        type=int,
        default=default(None),
        help="Worker processes; falls back to SPELLFORGE_THREADS",
    )
    parser.add_argument("--out", default=default("."), help="Output directory")
    parser.add_argument("--verbose", "-v", action="store_true", default=default(False), help="Debug logging")
    parser.add_argument(
        "--log-level",
        choices=LOG_LEVELS,
        type=str.upper,
        default=default(None),
        help="Logging level (default from settings)",
    )


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser with every subcommand."""
    parser = argparse.ArgumentParser(
        prog=settings.app_name,
        description="Forecast time on income support from administrative payment histories.",
    )
    parser.add_argument("--version", action="version", version=f"{settings.app_name} {settings.app_version}")
    _global_options(parser, suppress=False)

    # Global flags are accepted before or after the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    _global_options(shared, suppress=True)

    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    include_commands(subparsers, [shared])
    return parser


# Exception handlers


def _report(exc: Exception, message: str, detail: Optional[dict]) -> None:
    document = ErrorReport(error=exc.__class__.__name__, message=message, detail=detail or None)
    print(document.model_dump_json(), file=sys.stderr)


def spellforge_error_handler(exc: SpellforgeError, verbose: bool) -> int:
    """Handle library errors: report and map to the class exit code."""
    _report(exc, exc.message, exc.detail)
    return exc.exit_code


def validation_error_handler(exc: ValidationError, verbose: bool) -> int:
    """Handle pydantic validation errors raised outside a loader."""
    _report(exc, f"invalid configuration: {exc.error_count()} error(s)", {"errors": exc.errors(include_url=False)})
    return 2


def general_exception_handler(exc: Exception, verbose: bool) -> int:
    """Handle general exceptions."""
    _report(exc, "An unexpected error occurred", {"error": str(exc)} if verbose else None)
    if verbose:
        logger.exception("unexpected error")
    return 1


EXCEPTION_HANDLERS: Dict[Type[BaseException], Callable[[Exception, bool], int]] = {
    SpellforgeError: spellforge_error_handler,
    ValidationError: validation_error_handler,
    Exception: general_exception_handler,
}


def handle_exception(exc: Exception, verbose: bool) -> int:
    for kind, handler in EXCEPTION_HANDLERS.items():
        if isinstance(exc, kind):
            return handler(exc, verbose)
    raise exc


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    level = "DEBUG" if args.verbose else (args.log_level or settings.log_level)
    configure_logging(level)
    logger.debug("Starting %s v%s: %s", settings.app_name, settings.app_version, args.command)
    try:
        return int(args.handler(args) or 0)
    except Exception as exc:
        return handle_exception(exc, args.verbose)
