from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record_criterion(request):
    """Register a named acceptance criterion; its outcome is printed at session end."""

    def _record(label: str) -> None:
        _ACCEPTANCE[request.node.nodeid] = label

    return _record


def pytest_collection_modifyitems(items):
    # criteria that may be skipped before their body runs carry a marker instead
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            _ACCEPTANCE[item.nodeid] = marker.args[0]


def pytest_runtest_logreport(report):
    if report.nodeid in _ACCEPTANCE and report.when == "call":
        _ACCEPTANCE[report.nodeid] = (_ACCEPTANCE[report.nodeid], report.outcome)
    elif report.nodeid in _ACCEPTANCE and report.skipped:
        _ACCEPTANCE[report.nodeid] = (_ACCEPTANCE[report.nodeid], "skipped")


def pytest_terminal_summary(terminalreporter):
    rows = [v for v in _ACCEPTANCE.values() if isinstance(v, tuple)]
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in sorted(rows):
        mark = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{mark}] {label}")
