import numpy as np
import pytest

from cdasim.prices import PriceGrid


class FixedRng:
    """Deterministic stand-in for a numpy Generator in golden tests."""

    def __init__(self, random_value=0.0, uniform_value=None, normal_value=0.0):
        self._random = random_value
        self._uniform = uniform_value
        self._normal = normal_value

    def random(self):
        return self._random

    def uniform(self, low, high):
        return self._uniform if self._uniform is not None else low

    def normal(self, loc=0.0, scale=1.0):
        return loc + scale * self._normal


def pytest_terminal_summary(terminalreporter):
    """Echo one pass/fail line per acceptance criterion after the run."""
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid_01():
    return PriceGrid(0.1)


@pytest.fixture
def grid_001():
    return PriceGrid(0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
