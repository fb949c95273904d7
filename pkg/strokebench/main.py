"""Entry point for the strokebench command line."""
from __future__ import annotations

import logging
import sys
from typing import Optional, Sequence

from .cli.commands import EXIT_DATA, EXIT_USAGE, UsageError, build_parser, dispatch
from .core.logger import configure_logging
from .data.config_manager import load_config

LOGGER = logging.getLogger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    configure_logging(level)

    try:
        config = load_config(args.config)
        return dispatch(args, config)
    except UsageError as exc:
        LOGGER.error("%s", exc)
        return EXIT_USAGE
    except (ValueError, OSError) as exc:
        LOGGER.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
