import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.router import build_router
from app.config.settings import settings
from app.core.exceptions import ConfigError, FlatError

EXIT_FAILURE = 1
EXIT_CONFIG_ERROR = 2

logger = logging.getLogger(__name__)


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="[%(asctime)s] %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the command-line parser."""
    parser = argparse.ArgumentParser(
        prog="flat",
        description=f"{settings.app_name}: run and compare FLAT and baseline authentication",
    )
    parser.add_argument("--log-level", help=f"Override FLAT_LOG_LEVEL ({settings.log_level})")
    build_router(parser)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = create_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except ValidationError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_CONFIG_ERROR
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG_ERROR
    except FlatError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
