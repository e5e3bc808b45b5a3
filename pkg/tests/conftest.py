import math

import pytest

from flatkhinchin import builtin

GOLDEN = (math.sqrt(5) - 1) / 2


@pytest.fixture(scope="session")
def torus():
    return builtin("square_torus")


@pytest.fixture(scope="session")
def lshape():
    return builtin("L(2,2)")


@pytest.fixture(scope="session")
def octagon():
    return builtin("regular_octagon")


def torus_flow(x, y, tau, t):
    """Closed-form flow on the unit square torus."""
    return ((x + t * math.cos(2 * math.pi * tau)) % 1.0, (y + t * math.sin(2 * math.pi * tau)) % 1.0)


def circle_dist(a, b, length=1.0):
    d = abs(a - b) % length
    return min(d, length - d)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
