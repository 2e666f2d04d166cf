import numpy as np
import pytest

from rvint.paths import CovarianceSpec, TimeGrid


@pytest.fixture
def unit_grid():
    return TimeGrid(1.0, 1024)


@pytest.fixture
def std_cov():
    return CovarianceSpec.standard(4)


def brownian_batch(grid, n, seed):
    """Independent standard Brownian paths, shape (n, N + 1)."""
    rng = np.random.default_rng(seed)
    dW = rng.standard_normal((n, grid.N)) * np.sqrt(grid.dt)
    return np.concatenate([np.zeros((n, 1)), np.cumsum(dW, axis=1)], axis=1)
