import numpy as np
import pytest

from monoreg.grid import Box, GridFunction, dyadic_grid, equidistant_grid
from monoreg.order import Signature


def random_shape(rng, d, max_points):
    while True:
        shape = tuple(int(k) for k in rng.integers(1, 5, size=d))
        if np.prod(shape) <= max_points:
            return shape


def random_instance(rng, dims=(1, 2, 3), max_points=12, free=True):
    """Random (f, w, sig) on a small equidistant grid, weights in [0.5, 2]."""
    d = int(rng.choice(dims))
    shape = random_shape(rng, d, max_points)
    grid = equidistant_grid(Box.unit(d), shape)
    f = GridFunction(grid, rng.normal(size=shape))
    w = GridFunction(grid, rng.uniform(0.5, 2.0, size=shape))
    choices = [-1, 0, 1] if free else [-1, 1]
    sig = Signature(tuple(int(s) for s in rng.choice(choices, size=d)))
    return f, w, sig


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def make_instance(rng):
    def make(**kwargs):
        return random_instance(rng, **kwargs)
    return make


@pytest.fixture
def unit_line():
    """Level-1 grid on [0, 1]: cells [0, .5) and [.5, 1]."""
    return dyadic_grid(Box.unit(1), 1)


def grid_fn(values, box=None):
    """Grid function on the equidistant grid matching ``values``' shape."""
    values = np.asarray(values, dtype=float)
    box = box or Box.unit(values.ndim)
    return GridFunction(equidistant_grid(box, values.shape), values)


def ones_like(f):
    return GridFunction.constant(f.grid, 1.0)
