"""Logging setup shared by all library modules."""

import logging
import sys
from pathlib import Path

from config import Config

_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"
_configured = False


def configure_logging(level: str = None, log_to_file: bool = None):
    """
    Configure the package root logger once.

    Args:
        level: Log level name (uses Config.LOG_LEVEL if None)
        log_to_file: Also write to Config.LOG_DIR/toolkit.log (uses Config.LOG_TO_FILE if None)
    """
    global _configured

    root = logging.getLogger("src")
    root.setLevel(level or Config.LOG_LEVEL)

    if _configured:
        return

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(logging.Formatter(_FORMAT))
    root.addHandler(console)

    if Config.LOG_TO_FILE if log_to_file is None else log_to_file:
        log_dir = Path(Config.LOG_DIR)
        log_dir.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(log_dir / "toolkit.log", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(_FORMAT))
        root.addHandler(file_handler)

    root.propagate = False
    _configured = True


def get_logger(name: str) -> logging.Logger:
    """Return a module logger under the package root."""
    configure_logging()
    return logging.getLogger(name)
