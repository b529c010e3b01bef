import numpy as np
import pytest

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record():
    """Store the one-line verdict of an acceptance criterion."""

    def _record(number: int, name: str, passed: bool, detail: str) -> None:
        ACCEPTANCE_LINES[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
