import numpy as np
import pytest

from models.spectral import PERIODIC, Grid1D, SpaceTimeGrid, SpectralField


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    # dxi = 1/8, xi in [-8, 8)
    return Grid1D(8 * np.pi, 128)


@pytest.fixture
def wide_grid():
    return Grid1D(20.0, 128)


@pytest.fixture
def solver_grid():
    return Grid1D(20.0, 256, PERIODIC)


@pytest.fixture
def space_time_grid(wide_grid):
    return SpaceTimeGrid.centered(wide_grid, 8.0, 256)


def gaussian_datum(grid, amplitude=1.0, width=1.0):
    """amplitude * exp(-(x / width)^2), real."""
    return SpectralField.from_physical(grid, amplitude * np.exp(-(grid.x / width) ** 2), real_flag=True)


@pytest.fixture
def datum(wide_grid):
    return gaussian_datum(wide_grid)
