import math

import numpy as np
import pytest

from monoreg.errors import DimensionError, DomainError, GridMismatchError, WeightBoundError
from monoreg.grid import (
    Box, GridFunction, ScalarField, cell_average, cell_of, common_refinement, dyadic_grid,
    equidistant_grid, grid_around_point, lift, norms, refine, sample_midpoints,
)
from monoreg.order import Signature, leq_sigma

from conftest import grid_fn


def _field(fn, d=1, box=None):
    return ScalarField(fn, box or Box.unit(d))


# ── Boxes and grids ────────────────────────────────────────────────────────

def test_box_validation_and_parse():
    box = Box.parse("0:2,-1:1")
    assert box.lo == (0.0, -1.0) and box.hi == (2.0, 1.0)
    assert box.volume == 4.0
    with pytest.raises(DomainError):
        Box((1.0,), (0.0,))
    with pytest.raises(DomainError):
        Box.parse("0-1")


def test_dyadic_grid_level_one():
    grid = dyadic_grid(Box.unit(1), 1)
    assert grid.breakpoints[0].tolist() == [0.0, 0.5, 1.0]
    assert grid.midpoints()[0].tolist() == [0.25, 0.75]


def test_dyadic_grid_level_zero_square():
    grid = dyadic_grid(Box.unit(2), 0)
    assert grid.shape == (1, 1)
    assert grid.points().reshape(-1).tolist() == [0.5, 0.5]


def test_dyadic_grid_lengths():
    grid = dyadic_grid(Box((0.0, 0.0), (2.0, 1.0)), 2)
    assert [h[0] for h in grid.cell_lengths()] == [0.5, 0.25]
    assert grid.len_G == 0.5
    assert grid.vol_G == 0.125


def test_vol_G_needs_equidistant():
    from monoreg.grid import GridSpec
    grid = GridSpec(Box.unit(1), (np.array([0.0, 0.2, 1.0]),))
    with pytest.raises(GridMismatchError):
        grid.vol_G


def test_equidistant_grid_detects_dyadic_level():
    assert equidistant_grid(Box.unit(2), (4, 4)).level == 2
    assert equidistant_grid(Box.unit(2), (3, 3)).level is None


@pytest.mark.parametrize("x,cell", [(0.5, 1), (1.0, 1), (0.0, 0), (0.49, 0)])
def test_cell_of(unit_line, x, cell):
    assert cell_of(unit_line, [x]) == (cell,)


def test_cell_of_outside_box(unit_line):
    with pytest.raises(DomainError):
        cell_of(unit_line, [1.5])


@pytest.mark.parametrize("a,b,expected", [(2, 3, 3), (3, 3, 3), (0, 5, 5)])
def test_common_refinement(a, b, expected):
    box = Box.unit(1)
    assert common_refinement(dyadic_grid(box, a), dyadic_grid(box, b)).level == expected


def test_common_refinement_errors():
    with pytest.raises(GridMismatchError):
        common_refinement(dyadic_grid(Box.unit(1), 1), dyadic_grid(Box((0.0,), (2.0,)), 1))
    with pytest.raises(GridMismatchError):
        common_refinement(dyadic_grid(Box.unit(1), 1), equidistant_grid(Box.unit(1), (3,)))


# ── Grid functions and fields ──────────────────────────────────────────────

def test_grid_function_shape_and_weight_checks(unit_line):
    with pytest.raises(GridMismatchError):
        GridFunction(unit_line, [1.0, 2.0, 3.0])
    with pytest.raises(WeightBoundError):
        GridFunction(unit_line, [1.0, 0.0]).check_weight()
    with pytest.raises(WeightBoundError):
        GridFunction(unit_line, [1.0, 5.0], weight_bounds=(1.0, 4.0)).check_weight()
    w = GridFunction(unit_line, [1.0, 3.0], weight_bounds=(0.5, 4.0))
    w.check_weight()
    assert w.bounds() == (0.5, 4.0)


def test_sample_midpoints(unit_line):
    assert sample_midpoints(_field(lambda p: p[:, 0]), unit_line).values.tolist() == [0.25, 0.75]
    assert sample_midpoints(ScalarField.constant(Box.unit(1), 3.0), unit_line).values.tolist() == [3.0, 3.0]
    assert sample_midpoints(_field(lambda p: (p[:, 0] - 0.5) ** 2), unit_line).values.tolist() == [0.0625, 0.0625]


def test_cell_average():
    one_cell = dyadic_grid(Box.unit(1), 0)
    assert cell_average(_field(lambda p: p[:, 0]), one_cell, order=1).values[0] == pytest.approx(0.5)
    assert cell_average(_field(lambda p: np.ones(len(p))), one_cell, order=2).values[0] == pytest.approx(1.0)
    assert cell_average(_field(lambda p: p[:, 0] ** 2), one_cell, order=3).values[0] == pytest.approx(1 / 3, abs=1e-12)


def test_cell_average_two_dimensional():
    grid = dyadic_grid(Box.unit(2), 1)
    avg = cell_average(_field(lambda p: p[:, 0] * p[:, 1], d=2), grid)
    assert avg.values == pytest.approx(np.outer([0.25, 0.75], [0.25, 0.75]))


def test_lift_evaluates_cells(unit_line):
    field = lift(GridFunction(unit_line, [1.0, 2.0]))
    assert field([0.3]) == 1.0
    assert field([0.5]) == 2.0
    assert field([1.0]) == 2.0
    assert field.constant_on(dyadic_grid(Box.unit(1), 3))
    assert not field.constant_on(dyadic_grid(Box.unit(1), 0))


def test_lift_then_sample_reproduces(rng):
    grid = dyadic_grid(Box.unit(2), 2)
    g = GridFunction(grid, rng.normal(size=grid.shape))
    fine = dyadic_grid(Box.unit(2), 4)
    refined = refine(g, fine)
    assert np.array_equal(sample_midpoints(lift(refined), grid).values, g.values)
    pts = rng.random((50, 2))
    assert np.array_equal(lift(g).evaluate(pts), lift(refined).evaluate(pts))


def test_cells_preserve_order(rng):
    grid = dyadic_grid(Box.unit(2), 3)
    sig = Signature((1, -1))
    mids = grid.midpoints()
    for _ in range(200):
        x, y = rng.random(2), rng.random(2)
        if not leq_sigma(x, y, sig):
            x, y = y, x
        if not leq_sigma(x, y, sig):
            continue
        cx, cy = cell_of(grid, x), cell_of(grid, y)
        gx = [mids[i][k] for i, k in enumerate(cx)]
        gy = [mids[i][k] for i, k in enumerate(cy)]
        assert leq_sigma(gx, gy, sig)


def test_field_dimension_check():
    with pytest.raises(DimensionError):
        _field(lambda p: p[:, 0], d=2).evaluate(np.zeros((3, 1)))


# ── Grids around a point ───────────────────────────────────────────────────

def test_grid_around_half():
    grid = grid_around_point(Box.unit(1), [0.5], 0.3)
    assert grid.shape == (5,)
    assert cell_of(grid, [0.5]) == (2,)
    assert grid.len_G <= 0.3


def test_grid_around_third():
    grid = grid_around_point(Box.unit(1), [1 / 3], 0.5)
    assert grid.shape == (5,)
    assert grid.len_G <= 0.5


def test_grid_around_point_keeps_point_off_faces(rng):
    box = Box((0.0, -1.0), (2.0, 1.0))
    for _ in range(40):
        x0 = np.asarray(box.lo) + rng.random(2) * box.lengths
        x0[0] = round(x0[0], 2)
        for eps in (0.5, 0.1, 0.03):
            grid = grid_around_point(box, x0, eps)
            assert grid.len_G <= eps + 1e-12
            for axis, b in enumerate(grid.breakpoints):
                interior = b[1:-1]
                assert np.all(np.abs(interior - x0[axis]) > 1e-12)


def test_grid_around_corner():
    grid = grid_around_point(Box.unit(2), [0.0, 1.0], 0.25)
    assert cell_of(grid, [0.0, 1.0]) == (0, grid.shape[1] - 1)


def test_grid_around_point_rejects_bad_eps():
    with pytest.raises(DomainError):
        grid_around_point(Box.unit(1), [0.5], 0.0)


# ── Norms ──────────────────────────────────────────────────────────────────

def test_norms_examples():
    one = grid_fn([1.0])
    same = norms(one, one)
    assert (same.l2_weighted, same.sup) == (0.0, 0.0)
    n = norms(grid_fn([1.0]), grid_fn([0.0]), grid_fn([1.0]))
    assert (n.l2_weighted, n.sup) == (1.0, 1.0)
    n = norms(grid_fn([1.0, 0.0]), grid_fn([0.0, 0.0]))
    assert n.l2_weighted == pytest.approx(math.sqrt(0.5))
    assert n.sup == 1.0


def test_norms_on_common_refinement():
    coarse = GridFunction(dyadic_grid(Box.unit(1), 1), [1.0, 2.0])
    fine = GridFunction(dyadic_grid(Box.unit(1), 2), [1.0, 1.0, 2.0, 3.0])
    n = norms(coarse, fine)
    assert n.sup == 1.0
    assert n.l2_weighted == pytest.approx(0.5)
