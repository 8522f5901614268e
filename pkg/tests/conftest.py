"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

from collections import OrderedDict

import pytest

_OUTCOMES: "OrderedDict[int, list]" = OrderedDict()


class AcceptanceRecorder:
    def record(self, number: int, part: str, passed: bool, detail: str) -> bool:
        _OUTCOMES.setdefault(number, []).append((part, bool(passed), detail))
        return bool(passed)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceRecorder()


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        parts = _OUTCOMES[number]
        ok = all(p for _, p, _ in parts)
        detail = "; ".join(f"{name}: {'ok' if p else 'FAIL'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
