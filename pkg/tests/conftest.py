import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fracthartree.spectral import RadialGrid

settings.register_profile("numeric", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("numeric")


@pytest.fixture(scope="session")
def grid():
    return RadialGrid(2048, 64.0)


@pytest.fixture(scope="session")
def small_grid():
    return RadialGrid(512, 32.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gaussian(grid, width=1.0, norm=None):
    f = grid.field(lambda r: np.exp(-0.5 * (r / width) ** 2))
    if norm is not None:
        from fracthartree.spectral import l2_norm
        f = f * (norm / l2_norm(f))
    return f
