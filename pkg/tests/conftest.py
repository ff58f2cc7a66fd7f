import numpy as np
import pytest

from cdprlab import DynamicsParams, RobotGeometry
from cdprlab.config import ExperimentConfig


@pytest.fixture
def geom():
    return RobotGeometry()


@pytest.fixture
def params():
    return DynamicsParams()


@pytest.fixture
def cfg():
    return ExperimentConfig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_workspace_points(geom, n, seed=0):
    r = np.random.default_rng(seed)
    lo, hi = geom.workspace_min, geom.workspace_max
    return lo + (hi - lo) * r.random((n, 3))


# acceptance summary: one line per criterion, printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
