import logging

import numpy as np
import pytest

from wsplan.geom import Polygon
from wsplan.scene import Scene, chain_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_square():
    return Polygon([(0, 0), (1, 0), (1, 1), (0, 1)])


@pytest.fixture
def empty_scene():
    return Scene([-5, -5, 5, 5])


@pytest.fixture
def arm4():
    return chain_model([1, 1, 1, 1], radius=0.1, width=0.1)


@pytest.fixture(autouse=True)
def _quiet_warnings():
    logging.getLogger("wsplan").setLevel(logging.ERROR)
    yield


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
