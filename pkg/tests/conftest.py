import numpy as np
import pytest

from pong.experiments import explicit_grasp, tripod
from pong.grasp import CurvatureModel, GraspSpec
from pong.surfaces import CurvatureParams, ImplicitSurface


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def sphere():
    return ImplicitSurface("sphere", {"radius": 1.0})


@pytest.fixture
def tripod_grasp():
    return tripod(sigma=0.05)


@pytest.fixture
def skew_grasp():
    """Curvature-derived grasp on an ellipsoid without symmetric ties."""
    s = ImplicitSurface("ellipsoid", {"radii": [1.0, 0.8, 0.6]}, [0.1, -0.05, 0.02])
    curv = CurvatureParams(k_curv=0.1, eps=1.0)
    x = [s.ray_point(d) for d in ([1.0, 0.1, 0.2], [-0.5, 0.9, -0.1], [-0.6, -0.8, 0.15])]
    return GraspSpec.from_models(x, CurvatureModel(s, curv), surface=s, curvature=curv, mu=0.6)


@pytest.fixture
def explicit_skew():
    s = ImplicitSurface("sphere", {"radius": 0.7}, [0.0, 0.1, 0.0])
    x = [s.ray_point(d) for d in ([1.0, 0.0, 0.2], [-0.4, 1.0, 0.0], [-0.5, -0.9, -0.2])]
    return explicit_grasp(s, x, [[0.04, 0.07], [0.05, 0.03], [0.06, 0.06]], mu=0.5)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
