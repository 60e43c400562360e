import numpy as np
import pytest

from helpers import FactorHarness
from tennet.core import init_tnn


@pytest.fixture
def harness():
    return FactorHarness


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_tnn():
    def make(dim=3, rank=4, hidden=(5, 5), seed=0):
        return init_tnn(dim, hidden, rank, np.random.default_rng(seed))
    return make
