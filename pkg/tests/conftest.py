import numpy as np
import pytest

from delaywave.core import Grid1D, Grid2D

# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def grid1d():
    return Grid1D(nx=101)


@pytest.fixture
def square():
    return Grid2D(nx=21, ny=21)


def bump(x):
    """Compactly supported C^3 bump centered at 0.5."""
    return np.where(np.abs(x - 0.5) < 0.25, np.cos(2.0 * np.pi * (x - 0.5)) ** 4, 0.0)
