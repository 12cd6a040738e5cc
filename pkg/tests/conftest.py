"""Collects the acceptance verdict lines and repeats them at the end of the run."""

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record ``PASS``/``FAIL`` for a criterion and assert it."""

    def record(name: str, ok: bool, detail: str = "") -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
        print(line)
        _VERDICTS.append(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
