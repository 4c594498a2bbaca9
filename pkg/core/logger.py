"""
Logging setup for simulator modules.
Every module logs through its own named logger on stdout; LOG_LEVEL picks the level.
"""
import logging
import os
import sys
import time
from contextlib import contextmanager
from typing import Dict, Iterator, Optional

LOG_FORMAT = "%(asctime)s | %(name)s | %(levelname)s | %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _resolve_level(level: Optional[str]) -> int:
    name = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    resolved = logging.getLevelName(name)
    return resolved if isinstance(resolved, int) else logging.INFO


def setup_logger(name: str, level: Optional[str] = None) -> logging.Logger:
    """
    Configure and return a logger instance.

    Args:
        name: Logger name (usually __name__)
        level: DEBUG, INFO, WARNING or ERROR; defaults to env LOG_LEVEL, then INFO

    Returns:
        Logger with a single stdout handler
    """
    numeric_level = _resolve_level(level)
    new_logger = logging.getLogger(name)
    new_logger.setLevel(numeric_level)

    # One handler per logger, even when a module is imported twice
    if not new_logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setLevel(numeric_level)
        handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=DATE_FORMAT))
        new_logger.addHandler(handler)
        new_logger.propagate = False

    return new_logger


@contextmanager
def log_duration(logger: logging.Logger, label: str, level: int = logging.INFO) -> Iterator[Dict[str, float]]:
    """
    Time a block on the monotonic clock and log "<label> finished in X s".

    Yields a dict whose "seconds" entry is filled when the block exits.
    """
    record: Dict[str, float] = {}
    start = time.monotonic()
    try:
        yield record
    finally:
        record["seconds"] = round(time.monotonic() - start, 3)
        logger.log(level, f"{label} finished in {record['seconds']:.2f}s")
