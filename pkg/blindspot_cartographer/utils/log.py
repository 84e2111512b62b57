"""
Logging setup built on rich
"""

import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

PACKAGE_LOGGER = "blindspot_cartographer"

_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def get_logger(name: str) -> logging.Logger:
    """Logger below the package namespace; accepts a module __name__ or a short name"""
    if name.startswith(PACKAGE_LOGGER):
        return logging.getLogger(name)
    return logging.getLogger(f"{PACKAGE_LOGGER}.{name}")


def configure_logging(verbosity: int = 0, console: Optional[Console] = None) -> logging.Logger:
    """
    Install one RichHandler on the package logger

    Called by the CLI only. Repeated calls replace the handler instead of stacking them.
    """
    logger = logging.getLogger(PACKAGE_LOGGER)
    level = _LEVELS.get(verbosity, logging.DEBUG)

    for handler in list(logger.handlers):
        if isinstance(handler, RichHandler):
            logger.removeHandler(handler)

    handler = RichHandler(
        console=console or Console(stderr=True),
        show_path=verbosity > 1,
        rich_tracebacks=True,
        markup=False,
    )
    handler.setFormatter(logging.Formatter("%(message)s", datefmt="[%X]"))
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
    return logger
