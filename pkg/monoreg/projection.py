"""
projection — Monotonic regression of fields on a box by dyadic refinement.

For grid-constant data on an equidistant grid the continuous projection is
itself grid-constant and equals the lifted discrete solution. For general
fields the data are discretized on dyadic grids of increasing level; the
discrete solutions converge to the continuous projection, and each level
reports a bound on its distance to the limit:

    L2:   ||p(f_n) - p(f)||_2   <= sqrt(c_hi / c_lo) * ||f_n - f||_2
    sup:  ||p(f_n) - p(f)||_sup <= ||f_n - f||_sup

Both bounds hold when the weight is constant on the level's cells; other
levels are reported with ``certified = False``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .config import MAX_GRID_POINTS, QUAD_ORDER, SUP_SAMPLE_CAP
from .errors import DomainError, GridMismatchError, WeightBoundError
from .grid import (
    GridFunction, GridSpec, ScalarField, cell_average, cell_integrals, common_refinement,
    dyadic_grid, lift, norms, refine, sample_midpoints,
)
from .isotonic import solve
from .order import Signature

logger = logging.getLogger(__name__)

NormKind = Literal["l2", "sup"]
Mode = Literal["midpoint", "average"]


# ═════════════════════════════════════════════════════════════════════════════
# REPORT
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class LevelRecord:
    level: int
    n_points: int
    len_G: float
    discretization_error: float
    solve_objective: float
    bound: float
    successive_diff: float | None
    weight_bounds: tuple[float, float]
    certified: bool

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "n_points": self.n_points,
            "len_G": self.len_G,
            "discretization_error": self.discretization_error,
            "solve_objective": self.solve_objective,
            "bound": self.bound,
            "successive_diff": self.successive_diff,
            "c_lo": self.weight_bounds[0],
            "c_hi": self.weight_bounds[1],
            "certified": self.certified,
        }


CSV_COLUMNS = ("level", "len_G", "discretization_error", "bound", "successive_diff")


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Per-level discretization errors, bounds and successive differences."""

    levels: list[LevelRecord]
    final: GridFunction
    norm_kind: NormKind
    target: float
    flags: tuple[str, ...] = field(default=())

    @property
    def reached(self) -> bool:
        return "target_unreached" not in self.flags

    @property
    def final_field(self) -> ScalarField:
        return lift(self.final)

    def to_dict(self) -> dict:
        return {
            "norm_kind": self.norm_kind,
            "target": self.target,
            "flags": list(self.flags),
            "levels": [rec.to_dict() for rec in self.levels],
            "final": self.final.grid.to_dict() | {"values": self.final.values.tolist()},
        }

    def csv_rows(self) -> list[tuple]:
        """Plot-ready rows in ``CSV_COLUMNS`` order."""
        return [
            (rec.level, rec.len_G, rec.discretization_error, rec.bound, rec.successive_diff)
            for rec in self.levels
        ]


# ═════════════════════════════════════════════════════════════════════════════
# GRID-CONSTANT PROJECTION
# ═════════════════════════════════════════════════════════════════════════════

def project_grid_constant(f: GridFunction, w: GridFunction, sig: Signature) -> ScalarField:
    """Continuous projection of grid-constant data, lifted from the discrete solve."""
    if not f.grid.same_as(w.grid):
        grid = common_refinement(f.grid, w.grid)
        f, w = refine(f, grid), refine(w, grid)
    if not f.grid.equidistant:
        raise GridMismatchError("grid-constant projection needs an equidistant grid")
    result = solve(f, w, sig, certify_result=False)
    out = lift(result.fitted)
    return ScalarField(out.evaluator, out.box, regularity="bounded",
                       piecewise_on=f.grid, name="projection")


def error_bounds(c_lo: float, c_hi: float, disc_err: float, norm_kind: NormKind) -> float:
    """Distance bound between the projections of f_n and f."""
    if not 0 < c_lo <= c_hi < math.inf:
        raise WeightBoundError(f"need 0 < c_lo <= c_hi < inf, got ({c_lo}, {c_hi})")
    if disc_err < 0 or not math.isfinite(disc_err):
        raise DomainError(f"discretization error must be finite and >= 0, got {disc_err}")
    if norm_kind == "l2":
        return math.sqrt(c_hi / c_lo) * disc_err
    if norm_kind == "sup":
        return disc_err
    raise DomainError(f"unknown norm {norm_kind!r}")


# ═════════════════════════════════════════════════════════════════════════════
# DISCRETIZATION
# ═════════════════════════════════════════════════════════════════════════════

def default_max_level(d: int, max_points: int = MAX_GRID_POINTS) -> int:
    """Largest dyadic level whose grid holds at most ``max_points`` points."""
    return max(0, int(math.log2(max_points)) // d)


def discretize(f: ScalarField, grid: GridSpec, mode: Mode = "midpoint") -> GridFunction:
    if f.constant_on(grid):
        return sample_midpoints(f, grid)
    if mode == "midpoint":
        return sample_midpoints(f, grid)
    if mode == "average":
        return cell_average(f, grid)
    raise DomainError(f"unknown discretization mode {mode!r}")


def _weight_bounds(w: ScalarField, w_n: GridFunction) -> tuple[float, float]:
    c_lo, c_hi = float(w_n.values.min()), float(w_n.values.max())
    if w.modulus is None or w.constant_on(w_n.grid):
        return c_lo, c_hi
    slack = float(w.modulus(float(np.linalg.norm([h.max() for h in w_n.grid.cell_lengths()]))))
    if c_lo - slack > 0:
        c_lo -= slack
    c_hi += slack
    return c_lo, c_hi


def discretization_error(f: ScalarField, f_n: GridFunction, norm_kind: NormKind) -> float:
    """||f_n - f|| by Gauss quadrature (l2) or dense sampling (sup)."""
    grid = f_n.grid
    if f.constant_on(grid):
        return 0.0
    step = lift(f_n)
    if norm_kind == "l2":
        sq = cell_integrals(lambda pts: (step.evaluate(pts) - f.evaluate(pts)) ** 2, grid, QUAD_ORDER)
        return math.sqrt(float(sq.sum()))
    if norm_kind != "sup":
        raise DomainError(f"unknown norm {norm_kind!r}")
    if f.regularity != "continuous":
        logger.warning("sup error of %s is sampled but the field is only bounded", f.name or "field")
    level = grid.level if grid.level is not None else int(math.ceil(math.log2(max(grid.shape))))
    cap_level = int(math.log2(SUP_SAMPLE_CAP)) // grid.dim
    fine = dyadic_grid(grid.box, min(level + 3, cap_level))
    pts = fine.points()
    return float(np.abs(step.evaluate(pts) - f.evaluate(pts)).max())


# ═════════════════════════════════════════════════════════════════════════════
# REFINEMENT LOOP
# ═════════════════════════════════════════════════════════════════════════════

def approximate_projection(f: ScalarField, w: ScalarField, sig: Signature,
                           norm_kind: NormKind = "l2", max_level: int | None = None,
                           target: float = 0.0, mode: Mode = "midpoint") -> ConvergenceReport:
    """Solve on dyadic levels 0..max_level.

    A positive ``target`` stops the refinement at the first level whose bound
    meets it; ``target = 0`` runs every level.
    """
    if f.box != w.box:
        raise GridMismatchError(f"f lives on {f.box}, w on {w.box}")
    sig.check_dim(f.box.dim)
    if norm_kind not in ("l2", "sup"):
        raise DomainError(f"unknown norm {norm_kind!r}")
    if target < 0:
        raise DomainError(f"target must be >= 0, got {target}")
    flags = []
    ceiling = default_max_level(f.box.dim)
    if max_level is None:
        max_level = ceiling
    elif max_level > ceiling:
        logger.warning("level %d exceeds the grid budget; clamped to %d", max_level, ceiling)
        max_level = ceiling
        flags.append("clamped")
    if max_level < 0:
        raise DomainError(f"max_level must be >= 0, got {max_level}")

    records: list[LevelRecord] = []
    previous: GridFunction | None = None
    fitted = None
    for n in range(max_level + 1):
        grid = dyadic_grid(f.box, n)
        f_n = discretize(f, grid, mode)
        w_n = discretize(w, grid, mode)
        c_lo, c_hi = _weight_bounds(w, w_n)
        certified = w.constant_on(grid)
        result = solve(f_n, w_n, sig, certify_result=False)
        fitted = result.fitted
        disc = discretization_error(f, f_n, norm_kind)
        bound = error_bounds(c_lo, c_hi, disc, norm_kind)
        diff = None
        if previous is not None:
            between = norms(fitted, previous)
            diff = between.l2_weighted if norm_kind == "l2" else between.sup
        records.append(LevelRecord(
            level=n,
            n_points=grid.size,
            len_G=grid.len_G,
            discretization_error=disc,
            solve_objective=result.objective * grid.vol_G,
            bound=bound,
            successive_diff=diff,
            weight_bounds=(c_lo, c_hi),
            certified=certified,
        ))
        logger.debug("level %d: %d points, bound %.3g", n, grid.size, bound)
        previous = fitted
        if target > 0 and bound <= target:
            break
    if records[-1].bound > target:
        flags.append("target_unreached")
    return ConvergenceReport(records, fitted, norm_kind, target, tuple(flags))
