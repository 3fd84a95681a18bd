import sys

import numpy as np
import pytest

from fracmlmc.mesh import Grid1D
from fracmlmc.model import BlParams, make_sample


@pytest.fixture
def bl_default():
    return make_sample(BlParams(0.0, 0.5, 0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def grid41():
    return Grid1D(5.0, 41)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
