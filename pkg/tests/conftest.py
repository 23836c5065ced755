import os

import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report_line():
    """Record one acceptance summary line, printed at the end of the session."""
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    if os.environ.get("HBSIG_NUMBA") is not None:
        terminalreporter.write_line(f"HBSIG_NUMBA={os.environ['HBSIG_NUMBA']}")
