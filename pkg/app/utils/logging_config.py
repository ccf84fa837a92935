"""
Logging setup shared by the services, the CLI and the API.
"""

import logging
from typing import Optional

from app.config import settings

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure the root "app" logger once.

    Args:
        level: Log level name; defaults to HC_LOG_LEVEL
    """
    global _configured

    root = logging.getLogger("app")
    root.setLevel((level or settings.HC_LOG_LEVEL).upper())
    if _configured:
        return

    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Return a module logger under the "app" hierarchy."""
    return logging.getLogger(name)
