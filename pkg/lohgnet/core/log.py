"""
Logging setup.

Library modules only call ``logging.getLogger(__name__)``; the entry point
configures handlers once through ``configure_logging``.
"""

import logging
import sys
from typing import Optional

from lohgnet.config import settings

LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """
    Configure the root ``lohgnet`` logger.

    Args:
        level: Level name; defaults to ``settings.log_level``
    """
    logger = logging.getLogger("lohgnet")
    logger.setLevel((level or settings.log_level).upper())

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(handler)
    logger.propagate = False
