import numpy as np
import pytest


@pytest.fixture
def rng():
    return make_rng(0)


def make_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


@pytest.fixture
def make_rng_fixture():
    return make_rng
