import numpy as np
import pytest

from sqrtlasso import Problem

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny():
    """X = [[1], [1]], y = [1, 1]."""
    return Problem([[1.0], [1.0]], [1.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
