import logging
import math

import numpy as np
import pytest

from monoreg.errors import DomainError, GridMismatchError, WeightBoundError
from monoreg.fields import get_field, get_weight
from monoreg.grid import Box, GridFunction, GridSpec, ScalarField, dyadic_grid, lift, norms, refine, sample_midpoints
from monoreg.isotonic import solve
from monoreg.order import Signature
from monoreg.projection import (
    CSV_COLUMNS, approximate_projection, default_max_level, discretization_error, error_bounds,
    project_grid_constant,
)

from conftest import grid_fn, ones_like

INC1, INC2 = Signature((1,)), Signature((1, 1))


def _one(box):
    return ScalarField.constant(box, 1.0)


# ── Grid-constant projection ───────────────────────────────────────────────

def test_project_grid_constant_pools_two_cells():
    f = grid_fn([3.0, 1.0])
    field = project_grid_constant(f, ones_like(f), INC1)
    assert field([0.1]) == 2.0
    assert field([0.9]) == 2.0
    assert field.name == "projection"


def test_project_grid_constant_two_by_two():
    f = grid_fn([[0.0, 1.0], [1.0, 0.0]])
    field = project_grid_constant(f, ones_like(f), INC2)
    assert field([0.25, 0.25]) == pytest.approx(0.0, abs=1e-15)
    for x in ([0.25, 0.75], [0.75, 0.25], [0.75, 0.75]):
        assert field(x) == pytest.approx(2 / 3)


def test_project_grid_constant_keeps_monotone_data(rng):
    f = grid_fn(np.cumsum(rng.random(8)))
    field = project_grid_constant(f, ones_like(f), INC1)
    assert np.array_equal(sample_midpoints(field, f.grid).values, f.values)


def test_project_grid_constant_refines_to_common_grid():
    f = GridFunction(dyadic_grid(Box.unit(1), 1), [3.0, 1.0])
    w = GridFunction(dyadic_grid(Box.unit(1), 2), [1.0, 1.0, 1.0, 1.0])
    assert project_grid_constant(f, w, INC1)([0.6]) == 2.0


def test_project_grid_constant_needs_equidistant_grid():
    grid = GridSpec(Box.unit(1), (np.array([0.0, 0.2, 1.0]),))
    f = GridFunction(grid, [3.0, 1.0])
    with pytest.raises(GridMismatchError):
        project_grid_constant(f, GridFunction.constant(grid, 1.0), INC1)


# ── Error bounds ───────────────────────────────────────────────────────────

@pytest.mark.parametrize("c_lo,c_hi,disc,norm,expected", [
    (1.0, 1.0, 0.1, "l2", 0.1),
    (1.0, 4.0, 0.1, "l2", 0.2),
    (0.5, 3.0, 0.3, "sup", 0.3),
])
def test_error_bounds_examples(c_lo, c_hi, disc, norm, expected):
    assert error_bounds(c_lo, c_hi, disc, norm) == pytest.approx(expected)


def test_error_bounds_rejects_invalid_input():
    with pytest.raises(WeightBoundError):
        error_bounds(0.0, 1.0, 0.1, "l2")
    with pytest.raises(WeightBoundError):
        error_bounds(2.0, 1.0, 0.1, "l2")
    with pytest.raises(DomainError):
        error_bounds(1.0, 1.0, -0.1, "l2")
    with pytest.raises(DomainError):
        error_bounds(1.0, 1.0, 0.1, "l1")


def test_default_max_level():
    assert [default_max_level(d) for d in (1, 2, 3)] == [20, 10, 6]


# ── Discretization error ───────────────────────────────────────────────────

def test_discretization_error_of_linear_field():
    f = ScalarField(lambda p: p[:, 0], Box.unit(1))
    f_0 = sample_midpoints(f, dyadic_grid(Box.unit(1), 0))
    assert discretization_error(f, f_0, "l2") == pytest.approx(math.sqrt(1 / 12), abs=1e-12)
    # sampled on the level-3 midpoints
    assert discretization_error(f, f_0, "sup") == pytest.approx(0.4375)


def test_discretization_error_vanishes_for_grid_constant_fields():
    g = grid_fn([1.0, 5.0, 2.0, 0.0])
    field = lift(g)
    assert discretization_error(field, sample_midpoints(field, dyadic_grid(Box.unit(1), 3)), "l2") == 0.0


def test_sup_error_of_bounded_field_warns(caplog):
    builtin = get_field("step-mixture")
    f_0 = sample_midpoints(builtin.field, dyadic_grid(builtin.field.box, 0))
    with caplog.at_level(logging.WARNING, logger="monoreg"):
        discretization_error(builtin.field, f_0, "sup")
    assert "only bounded" in caplog.text


# ── Refinement loop ────────────────────────────────────────────────────────

@pytest.mark.parametrize("d", [1, 2])
def test_grid_constant_input_matches_direct_projection(rng, d):
    grid = dyadic_grid(Box.unit(d), 2)
    f = GridFunction(grid, rng.normal(size=grid.shape))
    w = GridFunction(grid, rng.uniform(0.5, 2.0, size=grid.shape))
    sig = Signature((1,) * d if d == 1 else (1, -1))
    direct = project_grid_constant(f, w, sig)
    pts = rng.random((200, d))
    for max_level in (2, 3, 4):
        report = approximate_projection(lift(f), lift(w), sig, max_level=max_level)
        approx = report.final_field
        assert np.abs(approx.evaluate(pts) - direct.evaluate(pts)).max() <= 1e-9
        assert all(rec.discretization_error == 0.0 for rec in report.levels[2:])
        assert all(rec.certified for rec in report.levels[2:])


def test_sup_bound_holds_for_perturbed_ground_truth(rng):
    box = Box.unit(2)
    coarse = dyadic_grid(box, 4)
    truth = GridFunction(coarse, np.add.outer(np.cumsum(rng.random(16)), np.cumsum(rng.random(16))))
    step = lift(truth)
    f = ScalarField(lambda p: step.evaluate(p) + 0.05 * np.sin(40 * p[:, 0]) * np.cos(37 * p[:, 1]), box)
    checker = get_weight("checkerboard", box)
    for n in (4, 5):
        grid = dyadic_grid(box, n)
        f_n = sample_midpoints(f, grid)
        exact = refine(truth, grid)
        fitted = solve(f_n, GridFunction.constant(grid, 1.0), INC2, certify_result=False).fitted
        assert norms(fitted, exact).sup <= norms(f_n, exact).sup + 1e-9
        w_n = sample_midpoints(checker, grid)
        fitted_w = solve(f_n, w_n, INC2, certify_result=False).fitted
        assert norms(fitted_w, exact).l2_weighted <= 2.0 * norms(f_n, exact).l2_weighted + 1e-9


def test_paraboloid_converges_to_analytic_fit():
    builtin = get_field("paraboloid1d")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, norm_kind="sup", max_level=10)
    assert len(report.levels) == 11
    xs = np.linspace(0.0, 1.0, 4001)[:, None]
    gap = np.abs(report.final_field.evaluate(xs) - builtin.projection.evaluate(xs)).max()
    assert gap <= 2e-3
    diffs = [rec.successive_diff for rec in report.levels[4:]]
    assert diffs[-1] < diffs[0]


def test_neg_ramp_pools_to_global_mean():
    builtin = get_field("neg-ramp")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, max_level=6)
    assert report.final.values == pytest.approx(np.full(64, -0.5), abs=1e-12)


def test_monotone_plane_has_zero_objective():
    builtin = get_field("monotone-plane")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC2, max_level=5)
    assert all(rec.solve_objective == 0.0 for rec in report.levels)
    diffs = [rec.successive_diff for rec in report.levels[1:]]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_checkerboard_weight_is_certified_from_level_two():
    builtin = get_field("saddle")
    box = builtin.field.box
    report = approximate_projection(builtin.field, get_weight("checkerboard", box), INC2, max_level=3)
    assert [rec.certified for rec in report.levels] == [False, False, True, True]
    assert report.levels[-1].weight_bounds == (1.0, 4.0)
    assert report.levels[-1].bound == pytest.approx(2.0 * report.levels[-1].discretization_error)


def test_ramp_weight_bounds_are_widened():
    builtin = get_field("paraboloid1d")
    box = builtin.field.box
    report = approximate_projection(builtin.field, get_weight("ramp", box), INC1, max_level=2)
    c_lo, c_hi = report.levels[-1].weight_bounds
    assert c_lo < 1.125 and c_hi > 1.875
    assert not report.levels[-1].certified


def test_target_zero_runs_every_level():
    builtin = get_field("paraboloid1d")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, max_level=4, target=0.0)
    assert len(report.levels) == 5
    assert "target_unreached" in report.flags
    assert not report.reached


def test_positive_target_stops_early():
    builtin = get_field("paraboloid1d")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, norm_kind="sup",
                                    max_level=10, target=0.05)
    assert report.reached
    assert report.levels[-1].bound <= 0.05
    assert len(report.levels) < 11


def test_level_request_is_clamped(caplog):
    builtin = get_field("paraboloid1d")
    with caplog.at_level(logging.WARNING, logger="monoreg"):
        report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, norm_kind="sup",
                                        max_level=99, target=10.0)
    assert "clamped" in report.flags
    assert "clamped" in caplog.text
    assert len(report.levels) == 1


def test_report_serialization():
    builtin = get_field("neg-ramp")
    report = approximate_projection(builtin.field, _one(builtin.field.box), INC1, max_level=2)
    rows = report.csv_rows()
    assert len(rows) == 3 and len(rows[0]) == len(CSV_COLUMNS)
    assert rows[0][-1] is None
    data = report.to_dict()
    assert list(data) == ["norm_kind", "target", "flags", "levels", "final"]
    assert data["levels"][1]["c_lo"] == 1.0


def test_approximate_projection_rejects_bad_arguments():
    builtin = get_field("paraboloid1d")
    one = _one(builtin.field.box)
    with pytest.raises(DomainError):
        approximate_projection(builtin.field, one, INC1, target=-1.0)
    with pytest.raises(DomainError):
        approximate_projection(builtin.field, one, INC1, norm_kind="l1")
    with pytest.raises(GridMismatchError):
        approximate_projection(builtin.field, _one(Box.unit(2)), INC1)
