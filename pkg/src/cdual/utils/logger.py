"""
Logging for cdual.

Usage:
    from cdual.utils.logger import get_logger

    logger = get_logger(__name__)
    logger.info("synthesis converged in %d iterations", k)

LOG_LEVEL (DEBUG .. CRITICAL, default INFO) and LOG_FORMAT (pretty or json,
default pretty) are read each time `configure_logging` runs. Everything goes
to stderr: stdout carries the CLI's JSON reports.
"""

import json
import logging
import os
import sys
from datetime import datetime, timezone

PACKAGE_PREFIX = "cdual."

# Third-party loggers cdual actually drives: POT's solvers and uvicorn's access log
QUIET_LOGGERS = ("ot", "uvicorn.access")

_RECORD_ATTRS = frozenset(vars(logging.makeLogRecord({}))) | {"message", "asctime"}


class PrettyFormatter(logging.Formatter):
    """`time │ LEVEL │ module │ message`, with coloured levels on a terminal."""

    COLORS = {
        "DEBUG": "\033[36m",
        "INFO": "\033[32m",
        "WARNING": "\033[33m",
        "ERROR": "\033[31m",
        "CRITICAL": "\033[35m",
    }
    RESET = "\033[0m"

    def __init__(self, color: bool):
        super().__init__(
            fmt="%(asctime)s │ %(level)s │ %(short_name)-22s │ %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S",
        )
        self.color = color

    def format(self, record: logging.LogRecord) -> str:
        level = f"{record.levelname:8}"
        if self.color and record.levelname in self.COLORS:
            level = f"{self.COLORS[record.levelname]}{level}{self.RESET}"
        record.level = level
        record.short_name = short_name(record.name)
        return super().format(record)


class JSONFormatter(logging.Formatter):
    """One JSON object per line; `extra={...}` fields are carried over."""

    def format(self, record: logging.LogRecord) -> str:
        entry = {
            "timestamp": datetime.fromtimestamp(record.created, timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        if record.exc_info:
            entry["exception"] = self.formatException(record.exc_info)
        for key, value in record.__dict__.items():
            if key not in _RECORD_ATTRS and key not in ("level", "short_name"):
                entry[key] = value
        return json.dumps(entry, default=str)


def short_name(name: str) -> str:
    return name[len(PACKAGE_PREFIX) :] if name.startswith(PACKAGE_PREFIX) else name


def configure_logging(level: str | None = None, fmt: str | None = None) -> None:
    """Install a single stderr handler on the root logger."""
    level_name = (level or os.getenv("LOG_LEVEL", "INFO")).upper()
    numeric_level = getattr(logging, level_name, logging.INFO)
    fmt = (fmt or os.getenv("LOG_FORMAT", "pretty")).lower()

    handler = logging.StreamHandler(sys.stderr)
    handler.setLevel(numeric_level)
    if fmt == "json":
        handler.setFormatter(JSONFormatter())
    else:
        handler.setFormatter(PrettyFormatter(color=sys.stderr.isatty()))

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()
    root_logger.addHandler(handler)

    for name in QUIET_LOGGERS:
        logging.getLogger(name).setLevel(logging.WARNING)


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


configure_logging()
