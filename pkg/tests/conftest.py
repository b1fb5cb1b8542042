import numpy as np
import pytest

from dptm.oracle import MixtureWorld
from dptm.schedule import make_linear_schedule


@pytest.fixture(scope="session")
def schedule():
    return make_linear_schedule(1000, 1e-4, 0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_world(seed, n=4, C=3, D=1, sigma=0.5, scale=1.0):
    g = np.random.default_rng(seed)
    means = scale * g.standard_normal((C, D, n, n))
    w = g.uniform(0.5, 1.5, (C, D))
    return MixtureWorld(means, w / w.sum(), sigma)


@pytest.fixture
def small_world():
    return random_world(7)
