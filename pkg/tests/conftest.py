"""Shared fixtures and the acceptance-criterion summary."""

from __future__ import annotations

import pytest

_CRITERIA: dict[int, tuple[str, bool, str]] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
    _CRITERIA[number] = (title, bool(passed), detail)


@pytest.fixture
def criterion():
    return record_criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {number}: {title}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
