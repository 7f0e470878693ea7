import numpy as np
import pytest

from lbmlayout.layout import Kind, LatticeGeometry, LayoutDescriptor
from lbmlayout.model import d2q37
from lbmlayout.validation import random_state

ACCEPTANCE_LINES: list[str] = []

# every layout/vl pairing that changes the storage order
LAYOUT_CASES = [(Kind.AOS, 1), (Kind.SOA, 1)] + [
    (k, vl) for k in (Kind.CSOA, Kind.CAOSOA) for vl in (1, 2, 4, 8)
]


@pytest.fixture(scope="session")
def model():
    return d2q37()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def lattice_16x32():
    return random_state(16, 32, seed=7)


def descriptor(kind, lx, ly, vl=1, **kw):
    return LayoutDescriptor(kind, LatticeGeometry(lx, ly, vl=vl, **kw))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
