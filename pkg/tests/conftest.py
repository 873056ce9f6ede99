import numpy as np
import pytest

from ddoco.harness.experiment import generate_data
from ddoco.lti import LtiSystem, random_system


def make_plant(seed: int, n: int = 3, m: int = 2, p: int = 1, steady: bool = True) -> LtiSystem:
    return random_system(n, m, p, np.random.default_rng(seed), require_steady_outputs=steady)


def record(sys: LtiSystem, N: int, order: int, seed: int = 0):
    return generate_data(sys, N, np.random.default_rng(seed), order)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def scalar_plant():
    # x+ = 0.5 x + u, y = x: steady gain 1 / (1 - 0.5) = 2
    return LtiSystem([[0.5]], [[1.0]], [[1.0]], [[0.0]])


@pytest.fixture
def plant():
    return make_plant(7)
