"""
Console logging for the command-line tools
"""
import logging
import sys
from typing import Optional

from replaygauge.core.config import settings


def configure_logging(level: Optional[str] = None) -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(settings.LOG_FORMAT))
    root = logging.getLogger("replaygauge")
    root.handlers[:] = [handler]
    root.setLevel((level or settings.LOG_LEVEL).upper())
    root.propagate = False
