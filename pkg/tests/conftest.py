import numpy as np
import pytest

from histodyn.grid import euclidean, minkowski


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid2():
    """Small 1+1 periodic grid, signature (+,-)."""
    return minkowski(2, (8, 8), (1.0, 1.0))


@pytest.fixture
def grid4():
    """Tiny 4d periodic grid, mostly-minus."""
    return minkowski(4, (3, 3, 3, 3), (1.0, 1.0, 1.0, 1.0))


@pytest.fixture
def grid1():
    return euclidean(1, (16,), (1.0,))


def grids_for_dims(dims, size=4):
    out = []
    for n in dims:
        out.append(minkowski(n, (size,) * n, (1.0,) * n))
        out.append(euclidean(n, (size,) * n, (1.0,) * n))
    return out
