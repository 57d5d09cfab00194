import numpy as np
import pytest

from helpers import bell_net


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


@pytest.fixture
def bell():
    return bell_net()
