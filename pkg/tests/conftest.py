import math

import pytest

from cuspwinding.coding import TruncatedAlphabet
from cuspwinding.moebius import conjugate, rotation
from cuspwinding.schottky import GroupPresentation, preset

ACCEPTANCE_LINES: dict[int, str] = {}


def two_hyperbolic():
    """one_cusp plus a second hyperbolic generator turned by a quarter of a half turn."""
    p = preset("one_cusp")
    h2 = conjugate(p.hyperbolics[0], rotation(math.pi / 4)).renamed("h2")
    return GroupPresentation(p.parabolics, p.hyperbolics + (h2,))


@pytest.fixture(scope="session")
def one_cusp():
    return preset("one_cusp")


@pytest.fixture(scope="session")
def two_cusp():
    return preset("two_cusp")


@pytest.fixture(scope="session")
def two_hyp():
    return two_hyperbolic()


@pytest.fixture(scope="session")
def alphabet3(one_cusp):
    return TruncatedAlphabet(one_cusp, 3)


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long running numerical checks")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
