import numpy as np
import pytest

from curvature_lab.metric_core import FiniteMetricSpace
from curvature_lab.spaces import euclidean_distance


@pytest.fixture
def plane_points():
    return np.random.default_rng(2024).normal(size=(30, 2))


@pytest.fixture
def plane_space(plane_points):
    return FiniteMetricSpace.from_points(plane_points, euclidean_distance)


@pytest.fixture
def star():
    """Center plus three unit leaves of the tripod, as a finite space."""
    D = np.array([[0, 1, 1, 1],
                  [1, 0, 2, 2],
                  [1, 2, 0, 2],
                  [1, 2, 2, 0]], dtype=float)
    return FiniteMetricSpace(D, ["c", "a", "b", "e"])


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
