import numpy as np
import pytest

from monoreg.errors import DomainError
from monoreg.fields import FIELDS, WEIGHTS, get_field, get_weight
from monoreg.grid import Box, GridFunction, dyadic_grid, sample_midpoints
from monoreg.isotonic import solve
from monoreg.order import is_monotone


def test_registry_names():
    assert sorted(FIELDS) == sorted(
        ["paraboloid1d", "neg-ramp", "monotone-plane", "paraboloid-plane", "saddle", "step-mixture"]
    )
    assert sorted(WEIGHTS) == ["checkerboard", "one", "ramp"]


def test_unknown_names():
    with pytest.raises(DomainError):
        get_field("banana")
    with pytest.raises(DomainError):
        get_weight("heavy", Box.unit(1))


@pytest.mark.parametrize("name", [n for n, b in FIELDS.items() if b.projection is not None])
def test_analytic_projection_matches_fine_solve(name):
    builtin = FIELDS[name]
    box = builtin.field.box
    grid = dyadic_grid(box, 10 if box.dim == 1 else 5)
    f_n = sample_midpoints(builtin.field, grid)
    fitted = solve(f_n, GridFunction.constant(grid, 1.0), builtin.signature, certify_result=False).fitted
    exact = sample_midpoints(builtin.projection, grid)
    assert is_monotone(exact, builtin.signature)
    assert np.abs(fitted.values - exact.values).max() <= (4e-3 if box.dim == 1 else 6e-2)


def test_checkerboard_weight():
    w = get_weight("checkerboard", Box.unit(2))
    assert w([0.1, 0.1]) == 1.0
    assert w([0.3, 0.1]) == 4.0
    assert w([1.0, 1.0]) == 1.0
    assert w.constant_on(dyadic_grid(Box.unit(2), 3))
    assert not w.constant_on(dyadic_grid(Box.unit(2), 1))


def test_ramp_weight_on_shifted_box():
    w = get_weight("ramp", Box((2.0,), (3.0,)))
    assert w([2.0]) == 1.0
    assert w([3.0]) == 2.0
