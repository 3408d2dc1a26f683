"""
averaging — Weighted averages over cell unions and the min-max value formulas.

The projection's value at x is an inf over lower sets holding x of a sup
over upper sets holding x of the weighted mean of f on their intersection
(and, equally, the sup-inf of the same means). On a grid the families of
sets reduce to unions of cells, which makes the formula computable;
``pointwise_value`` uses grids that keep the query point strictly inside a
cell to evaluate the continuous representative.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .config import ENUM_CAP, POINT_BUDGET, POINT_MAX_CELLS, UNIVARIATE_MESH
from .errors import ConvergenceError, DimensionError, DomainError, GridMismatchError
from .grid import (
    GridFunction, GridSpec, ScalarField, cell_integrals, cell_of, grid_around_point, lift,
    sample_midpoints,
)
from .isotonic import minmax_value, solve
from .order import IndexSet, Signature

logger = logging.getLogger(__name__)

# Richardson disagreement beyond this is logged.
_MESH_WARN = 1e-3
# Candidate endpoints processed per block of the univariate table.
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class AvQuery:
    """A lower and an upper cell-union set meeting in the anchor's cell."""

    lower: IndexSet
    upper: IndexSet
    anchor: tuple[float, ...]

    def __post_init__(self):
        if self.lower.kind != "lower" or self.upper.kind != "upper":
            raise DomainError("AvQuery needs a lower set and an upper set")
        if self.lower.mask.shape != self.upper.mask.shape:
            raise GridMismatchError("lower and upper sets live on different grids")
        if not np.any(self.region):
            raise DomainError("lower and upper sets do not intersect")
        object.__setattr__(self, "anchor", tuple(float(c) for c in self.anchor))

    @property
    def region(self) -> np.ndarray:
        return self.lower.mask & self.upper.mask

    def holds_anchor(self, grid: GridSpec) -> bool:
        return bool(self.region[cell_of(grid, self.anchor)])


def _region_mask(region) -> np.ndarray:
    if isinstance(region, AvQuery):
        return region.region
    if isinstance(region, IndexSet):
        return region.mask
    return np.asarray(region, dtype=bool)


def av(f: GridFunction | ScalarField, w: GridFunction | ScalarField, region,
       grid: GridSpec | None = None) -> float:
    """Weighted mean of f over a union of grid cells.

    Exact for grid functions; fields are integrated cell by cell with Gauss
    quadrature on ``grid`` (taken from whichever argument is a grid function).
    """
    mask = _region_mask(region)
    if not mask.any():
        raise DomainError("averaging region is empty")
    if isinstance(f, GridFunction) and isinstance(w, GridFunction):
        if not f.grid.same_as(w.grid):
            raise GridMismatchError("f and w must live on the same grid")
        vols = f.grid.cell_volumes()[mask]
        wv = w.values[mask] * vols
        return float(np.sum(f.values[mask] * wv) / np.sum(wv))
    if grid is None:
        grid = next((g.grid for g in (f, w) if isinstance(g, GridFunction)), None)
    if grid is None:
        raise GridMismatchError("averaging two fields needs an explicit grid")
    if mask.shape != grid.shape:
        raise GridMismatchError(f"region has shape {mask.shape}, grid has {grid.shape}")
    fe = (lift(f) if isinstance(f, GridFunction) else f).evaluate
    we = (lift(w) if isinstance(w, GridFunction) else w).evaluate
    num = cell_integrals(lambda pts: fe(pts) * we(pts), grid)
    den = cell_integrals(we, grid)
    return float(num[mask].sum() / den[mask].sum())


def a_grid(f: GridFunction, w: GridFunction, sig: Signature, x, variant: str = "inf-sup",
           cap: int = ENUM_CAP) -> float:
    """Min-max averaging value at x over cell-union lower and upper sets."""
    if not f.grid.same_as(w.grid):
        raise GridMismatchError("f and w must live on the same grid")
    if not f.grid.equidistant:
        raise GridMismatchError("averaging formula needs an equidistant grid")
    sig.check_dim(f.grid.dim)
    index = cell_of(f.grid, x)
    return minmax_value(f.values, w.values, sig, index, variant=variant, cap=cap)


# ═════════════════════════════════════════════════════════════════════════════
# UNIVARIATE FORMULA
# ═════════════════════════════════════════════════════════════════════════════

def _univariate(f: ScalarField, w: ScalarField, x: float, mesh: int) -> float:
    a, b = f.box.lo[0], f.box.hi[0]
    left = a + (x - a) * np.arange(mesh) / mesh           # u in [a, x)
    right = x + (b - x) * np.arange(1, mesh + 1) / mesh   # v in (x, b]
    # Refine each side so the trapezoid tables resolve the integrands.
    nodes = np.concatenate([np.linspace(a, x, 4 * mesh + 1), np.linspace(x, b, 4 * mesh + 1)[1:]])
    fw = f.evaluate(nodes[:, None]) * w.evaluate(nodes[:, None])
    ww = w.evaluate(nodes[:, None])
    cum_fw = integrate.cumulative_trapezoid(fw, nodes, initial=0.0)
    cum_w = integrate.cumulative_trapezoid(ww, nodes, initial=0.0)
    iu = np.searchsorted(nodes, left)
    iv = np.searchsorted(nodes, right)
    iu = np.clip(iu, 0, nodes.size - 1)
    iv = np.clip(iv, 0, nodes.size - 1)
    best = np.inf
    for start in range(0, mesh, _CHUNK):
        cols = iv[start:start + _CHUNK]
        num = cum_fw[cols][None, :] - cum_fw[iu][:, None]
        den = cum_w[cols][None, :] - cum_w[iu][:, None]
        best = min(best, float((num / den).max(axis=0).min()))
    return best


def univariate_closed_form(f: ScalarField, w: ScalarField, x: float,
                           mesh: int = UNIVARIATE_MESH) -> float:
    """inf over v in (x,b] of sup over u in [a,x) of the weighted mean on [u,v].

    Value of the continuous nondecreasing representative at an interior x.
    """
    if f.box.dim != 1 or w.box.dim != 1:
        raise DimensionError("the univariate formula needs a one-dimensional box")
    if f.box != w.box:
        raise GridMismatchError(f"f lives on {f.box}, w on {w.box}")
    if mesh < 2:
        raise DomainError(f"mesh must be >= 2, got {mesh}")
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    a, b = f.box.lo[0], f.box.hi[0]
    if not a < x < b:
        raise DomainError(f"x = {x} is not interior to [{a}, {b}]")
    fine = _univariate(f, w, x, mesh)
    coarse = _univariate(f, w, x, max(2, mesh // 2))
    if abs(fine - coarse) > _MESH_WARN:
        logger.warning("univariate mesh %d and %d disagree by %.3g at x=%g",
                       mesh, mesh // 2, abs(fine - coarse), x)
    return fine


# ═════════════════════════════════════════════════════════════════════════════
# POINTWISE EVALUATION
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class PointValue:
    x0: tuple[float, ...]
    value: float
    levels_used: int
    last_diff: float
    history: tuple[float, ...]
    grid_shape: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "x0": list(self.x0),
            "value": self.value,
            "levels_used": self.levels_used,
            "last_diff": self.last_diff,
        }


def _restrict(field: ScalarField, axes: tuple[int, ...], x0: np.ndarray) -> ScalarField:
    """The field on the sub-box of ``axes`` with the other coordinates fixed at x0."""
    box = field.box.sub_box(axes)
    axes_idx = list(axes)

    def evaluator(pts):
        full = np.broadcast_to(x0, (pts.shape[0], x0.size)).copy()
        full[:, axes_idx] = pts
        return field.evaluate(full)

    return ScalarField(evaluator, box, regularity=field.regularity,
                       modulus=field.modulus, name=field.name)


def pointwise_value(f: ScalarField, w: ScalarField, sig: Signature, x0, tol: float, *,
                    budget: int = POINT_BUDGET, max_cells: int = POINT_MAX_CELLS) -> PointValue:
    """Value of the continuous monotone representative at x0.

    Free coordinates are frozen at x0; on the active sub-box, grids holding x0
    strictly inside a cell are refined (eps = side / 2^k, k = 2..budget) until
    two successive values agree within ``tol``. A level whose grid is not
    strictly finer along every active axis than the last one solved is
    skipped; ``levels_used`` counts the grids actually solved.
    """
    if f.box != w.box:
        raise GridMismatchError(f"f lives on {f.box}, w on {w.box}")
    sig.check_dim(f.box.dim)
    if tol <= 0:
        raise DomainError(f"tol must be positive, got {tol}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != f.box.dim:
        raise DimensionError(f"x0 has dimension {x0.size}, box has {f.box.dim}")
    if not f.box.contains(x0):
        raise DomainError(f"{x0.tolist()} lies outside {f.box}")
    if not sig.active:
        value = f(x0)
        return PointValue(tuple(x0), value, 0, 0.0, (value,))

    axes = sig.active
    fa, wa = _restrict(f, axes, x0), _restrict(w, axes, x0)
    sub_sig = sig.restricted()
    xa = x0[list(axes)]
    side = fa.box.side
    history: list[float] = []
    previous = None
    for k in range(2, budget + 1):
        grid = grid_around_point(fa.box, xa, side / 2 ** k)
        if previous is not None and any(n <= m for n, m in zip(grid.shape, previous)):
            continue
        previous = grid.shape
        if grid.size > max_cells:
            logger.debug("point grid of %d cells exceeds the cap; stopping", grid.size)
            break
        fitted = solve(sample_midpoints(fa, grid), sample_midpoints(wa, grid), sub_sig,
                       certify_result=False).fitted
        history.append(float(fitted.values[cell_of(grid, xa)]))
        logger.debug("eps level %d: %s cells, value %.12g", k, grid.shape, history[-1])
        if len(history) >= 2 and abs(history[-1] - history[-2]) <= tol:
            return PointValue(tuple(x0), history[-1], len(history), abs(history[-1] - history[-2]),
                              tuple(history), grid.shape)
    raise ConvergenceError(
        f"pointwise value at {x0.tolist()} did not settle within tol {tol}",
        last_values=history[-2:],
        levels_used=len(history),
    )
