import json
import logging

import pytest

from cdual.utils.logger import (
    QUIET_LOGGERS,
    JSONFormatter,
    PrettyFormatter,
    configure_logging,
    short_name,
)


@pytest.fixture(autouse=True)
def restore_logging():
    yield
    configure_logging()


def _record(name: str = "cdual.core.selfdual", **extra) -> logging.LogRecord:
    record = logging.makeLogRecord(
        {"name": name, "levelname": "WARNING", "levelno": logging.WARNING, "msg": "residual %.1e", "args": (0.5,)}
    )
    record.__dict__.update(extra)
    return record


def test_short_name_strips_package_prefix_only():
    assert short_name("cdual.pipeline.runs") == "pipeline.runs"
    assert short_name("uvicorn.error") == "uvicorn.error"


def test_pretty_lines_are_plain_off_a_terminal():
    line = PrettyFormatter(color=False).format(_record())
    assert "\033[" not in line
    assert "│ WARNING  │ core.selfdual" in line
    assert line.endswith("residual 5.0e-01")

    colored = PrettyFormatter(color=True).format(_record())
    assert "\033[33mWARNING" in colored


def test_json_lines_carry_extra_fields():
    entry = json.loads(JSONFormatter().format(_record(seed=7)))
    assert entry["logger"] == "cdual.core.selfdual"
    assert entry["message"] == "residual 5.0e-01"
    assert entry["seed"] == 7
    assert "msg" not in entry and "args" not in entry


def test_configure_logging_installs_one_stderr_handler(monkeypatch):
    monkeypatch.setenv("LOG_FORMAT", "json")
    configure_logging("debug")
    root = logging.getLogger()
    assert root.level == logging.DEBUG
    assert len(root.handlers) == 1
    assert isinstance(root.handlers[0].formatter, JSONFormatter)
    for name in QUIET_LOGGERS:
        assert logging.getLogger(name).level == logging.WARNING

    configure_logging("nonsense", fmt="pretty")
    assert logging.getLogger().level == logging.INFO
    assert isinstance(logging.getLogger().handlers[0].formatter, PrettyFormatter)
