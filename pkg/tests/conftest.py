import numpy as np
import pytest

from kground import radial
from kground.geometry import ProblemSpec


@pytest.fixture(scope="session")
def base_spec():
    # exterior of the ball of radius 2 in R^3, a = 1, p = 4
    return ProblemSpec(N=3, m=2, p=4.0, R=2.0)


@pytest.fixture(scope="session")
def radial_solution(base_spec):
    return radial.solve_radial(base_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
