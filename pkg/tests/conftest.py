import numpy as np
import pytest

from semiclassical.analytic import CoherentScenario, LinearScenario
from semiclassical.domain import CoherentPrep, GaussianPrep, Harmonic, Linear, SystemParams


@pytest.fixture
def linear_1d():
    params = SystemParams(1.0, 1.0, Linear((1.0,)), 1)
    return LinearScenario(GaussianPrep((0.0,), 1.0, (0.5,)), params)


@pytest.fixture
def linear_3d():
    params = SystemParams(1.0, 1.0, Linear((0.0, 0.0, 1.0)), 3)
    return LinearScenario(GaussianPrep((0.0, 0.0, 0.0), 1.0, (0.2, 0.0, 0.3)), params)


@pytest.fixture
def coherent_2d():
    params = SystemParams(1.0, 1.0, Harmonic(1.0), 2)
    return CoherentScenario(CoherentPrep((1.0, 0.5), (0.0, 0.5), 1.0), params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
