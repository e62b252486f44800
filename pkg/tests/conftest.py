import numpy as np
import pytest

from musel.env import WorldConfig


@pytest.fixture
def world():
    return WorldConfig()


@pytest.fixture
def world2():
    return WorldConfig(task="two_sphere")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
