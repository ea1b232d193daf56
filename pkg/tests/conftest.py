import numpy as np
import pytest

from arcsim.geometry import RadialGrid


@pytest.fixture
def grid64():
    return RadialGrid.make(1.0, 64)


@pytest.fixture
def grid256():
    return RadialGrid.make(1.0, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_positive_field(rng, N, lo=0.1, hi=2.0):
    return rng.uniform(lo, hi, N)
