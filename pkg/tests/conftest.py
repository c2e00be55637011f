import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reginf import fixtures, regmod


@pytest.fixture(scope="session")
def plane():
    return fixtures.plane_map(1.0)


@pytest.fixture(scope="session")
def plane2x():
    return fixtures.plane_map(2.0)


@pytest.fixture(scope="session")
def ray():
    return fixtures.horizontal_ray_map()


@pytest.fixture(scope="session")
def three_piece():
    return fixtures.three_piece_map()


@pytest.fixture(scope="session")
def staircase():
    return fixtures.staircase_map()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    return regmod.SamplerConfig(budget=1500, seed=0)
