import numpy as np
import pytest

from reflou import Ball, GaussianSpace, HalfSpace


@pytest.fixture
def unit1():
    return GaussianSpace([1.0])


@pytest.fixture
def unit2():
    return GaussianSpace([1.0, 1.0])


@pytest.fixture
def aniso3():
    return GaussianSpace([2.0, 1.0, 0.5])


@pytest.fixture
def halfspace():
    return HalfSpace(1, 0.0)


@pytest.fixture
def ball():
    return Ball(1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
