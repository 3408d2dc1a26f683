"""
grid — Boxes, rectangular grids, grid-constant functions and scalar fields.

A grid on the box Q = [a_1,b_1] x ... x [a_d,b_d] is a product of per-axis
partitions; its points are the cell midpoints. Cells are lower-semiclosed
([t_{k-1}, t_k)) except the last cell along each axis, which also holds b_i,
so every point of Q lies in exactly one cell.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Literal

import numpy as np
from scipy import special

from .config import QUAD_ORDER
from .errors import DimensionError, DomainError, GridMismatchError, WeightBoundError

logger = logging.getLogger(__name__)

_BOX_TOL = 1e-12


# ═════════════════════════════════════════════════════════════════════════════
# BOX
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Box:
    """Compact rectangular domain ``prod_i [lo_i, hi_i]``."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(a) for a in np.atleast_1d(self.lo))
        hi = tuple(float(b) for b in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise DimensionError(f"box bounds have lengths {len(lo)} and {len(hi)}")
        if any(not a < b for a, b in zip(lo, hi)):
            raise DomainError(f"box needs lo < hi on every axis, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @classmethod
    def parse(cls, text: str) -> "Box":
        """Parse ``"a1:b1,a2:b2"``."""
        lo, hi = [], []
        for part in text.split(","):
            try:
                a, b = part.split(":")
                lo.append(float(a))
                hi.append(float(b))
            except ValueError:
                raise DomainError(f"bad box axis {part!r} in {text!r}") from None
        return cls(tuple(lo), tuple(hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def side(self) -> float:
        """Longest edge length."""
        return float(self.lengths.max())

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionError(f"point has dimension {x.size}, box has {self.dim}")
        slack = _BOX_TOL * np.maximum(1.0, self.lengths)
        return bool(np.all(x >= np.asarray(self.lo) - slack) and np.all(x <= np.asarray(self.hi) + slack))

    def sub_box(self, axes) -> "Box":
        return Box(tuple(self.lo[i] for i in axes), tuple(self.hi[i] for i in axes))

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}


# ═════════════════════════════════════════════════════════════════════════════
# GRID
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class GridSpec:
    """Product grid given by per-axis breakpoints; points are cell midpoints."""

    box: Box
    breakpoints: tuple[np.ndarray, ...]
    equidistant: bool = False
    level: int | None = None

    def __post_init__(self):
        bps = tuple(np.asarray(b, dtype=float) for b in self.breakpoints)
        if len(bps) != self.box.dim:
            raise DimensionError(f"{len(bps)} partitions for a {self.box.dim}-d box")
        for i, b in enumerate(bps):
            if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
                raise GridMismatchError(f"axis {i}: breakpoints must be strictly increasing")
            if b[0] != self.box.lo[i] or b[-1] != self.box.hi[i]:
                raise GridMismatchError(f"axis {i}: breakpoints must span [{self.box.lo[i]}, {self.box.hi[i]}]")
            b.setflags(write=False)
        object.__setattr__(self, "breakpoints", bps)

    @property
    def dim(self) -> int:
        return self.box.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b.size - 1 for b in self.breakpoints)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def is_dyadic(self) -> bool:
        return self.level is not None

    def midpoints(self) -> tuple[np.ndarray, ...]:
        return tuple(0.5 * (b[:-1] + b[1:]) for b in self.breakpoints)

    def cell_lengths(self) -> tuple[np.ndarray, ...]:
        return tuple(np.diff(b) for b in self.breakpoints)

    def points(self) -> np.ndarray:
        """Grid points as an array of shape ``(*shape, d)``."""
        return np.stack(np.meshgrid(*self.midpoints(), indexing="ij"), axis=-1)

    @property
    def len_G(self) -> float:
        """Largest cell edge length."""
        return float(max(h.max() for h in self.cell_lengths()))

    @property
    def vol_G(self) -> float:
        """Common cell volume of an equidistant grid."""
        if not self.equidistant:
            raise GridMismatchError("vol_G is only defined for equidistant grids")
        return float(np.prod([h[0] for h in self.cell_lengths()]))

    def cell_volumes(self) -> np.ndarray:
        vols = np.ones(self.shape)
        for axis, h in enumerate(self.cell_lengths()):
            shape = [1] * self.dim
            shape[axis] = h.size
            vols = vols * h.reshape(shape)
        return vols

    def same_as(self, other: "GridSpec") -> bool:
        return self.box == other.box and all(
            np.array_equal(a, b) for a, b in zip(self.breakpoints, other.breakpoints)
        )

    def to_dict(self) -> dict:
        return {
            "box": self.box.to_dict(),
            "breakpoints": [b.tolist() for b in self.breakpoints],
            "equidistant": self.equidistant,
            "level": self.level,
        }


def dyadic_grid(box: Box, level: int) -> GridSpec:
    """Equidistant grid with ``2**level`` cells per axis."""
    if level < 0:
        raise DomainError(f"dyadic level must be >= 0, got {level}")
    m = 2 ** level
    bps = tuple(np.linspace(a, b, m + 1) for a, b in zip(box.lo, box.hi))
    return GridSpec(box, bps, equidistant=True, level=level)


def equidistant_grid(box: Box, counts) -> GridSpec:
    """Equidistant grid with ``counts[i]`` cells along axis i."""
    counts = tuple(int(c) for c in counts)
    if len(counts) != box.dim or any(c < 1 for c in counts):
        raise DimensionError(f"need {box.dim} positive cell counts, got {counts}")
    bps = tuple(np.linspace(a, b, c + 1) for a, b, c in zip(box.lo, box.hi, counts))
    level = None
    if len(set(counts)) == 1 and counts[0] & (counts[0] - 1) == 0:
        level = counts[0].bit_length() - 1
    return GridSpec(box, bps, equidistant=True, level=level)


def cell_index(grid: GridSpec, points) -> np.ndarray:
    """Cell multi-indices for an array of points of shape ``(..., d)``."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != grid.dim:
        raise DimensionError(f"points have dimension {pts.shape[-1]}, grid has {grid.dim}")
    lo = np.asarray(grid.box.lo)
    hi = np.asarray(grid.box.hi)
    slack = _BOX_TOL * np.maximum(1.0, hi - lo)
    if np.any(pts < lo - slack) or np.any(pts > hi + slack):
        raise DomainError("point outside the grid's box")
    out = np.empty(pts.shape, dtype=np.int64)
    for axis, b in enumerate(grid.breakpoints):
        k = np.searchsorted(b, pts[..., axis], side="right") - 1
        out[..., axis] = np.clip(k, 0, b.size - 2)
    return out


def cell_of(grid: GridSpec, x) -> tuple[int, ...]:
    """Index of the cell containing x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return tuple(int(k) for k in cell_index(grid, x))


def common_refinement(g1: GridSpec, g2: GridSpec) -> GridSpec:
    """The finer of two dyadic grids on the same box."""
    if g1.box != g2.box:
        raise GridMismatchError(f"grids live on different boxes: {g1.box} vs {g2.box}")
    if not (g1.is_dyadic and g2.is_dyadic):
        raise GridMismatchError("common refinement needs dyadic grids")
    return g1 if g1.level >= g2.level else g2


# ═════════════════════════════════════════════════════════════════════════════
# FUNCTIONS ON GRIDS AND BOXES
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real-valued function constant on the cells of a grid."""

    grid: GridSpec
    values: np.ndarray
    weight_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise GridMismatchError(f"values have shape {values.shape}, grid has {self.grid.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.weight_bounds is not None:
            c_lo, c_hi = (float(c) for c in self.weight_bounds)
            if not 0 < c_lo <= c_hi < math.inf:
                raise WeightBoundError(f"weight bounds must satisfy 0 < c_lo <= c_hi < inf, got {self.weight_bounds}")
            object.__setattr__(self, "weight_bounds", (c_lo, c_hi))

    @classmethod
    def constant(cls, grid: GridSpec, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.shape, float(c)))

    def with_values(self, values) -> "GridFunction":
        return GridFunction(self.grid, values)

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def bounds(self) -> tuple[float, float]:
        """Declared weight bounds, else the observed min/max."""
        if self.weight_bounds is not None:
            return self.weight_bounds
        return float(self.values.min()), float(self.values.max())

    def check_weight(self):
        """Raise WeightBoundError unless the values are a valid weight."""
        v = self.values
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise WeightBoundError("weights must be finite and strictly positive")
        if self.weight_bounds is not None:
            c_lo, c_hi = self.weight_bounds
            if v.min() < c_lo or v.max() > c_hi:
                raise WeightBoundError(
                    f"weights span [{v.min()}, {v.max()}], outside declared [{c_lo}, {c_hi}]"
                )


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A real function on a box, evaluated pointwise.

    ``evaluator`` maps an ``(m, d)`` array of points to ``m`` values.
    ``piecewise_on`` names a grid the field is constant on, when known.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    box: Box
    regularity: Literal["bounded", "continuous"] = "continuous"
    modulus: Callable[[float], float] | None = None
    piecewise_on: GridSpec | None = None
    name: str = ""

    def evaluate(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != self.box.dim:
            raise DimensionError(f"points have dimension {pts.shape[-1]}, field has {self.box.dim}")
        flat = pts.reshape(-1, self.box.dim)
        out = np.asarray(self.evaluator(flat), dtype=float)
        return np.broadcast_to(out, (flat.shape[0],)).reshape(pts.shape[:-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim <= 1:
            return float(self.evaluate(x.reshape(1, -1))[0])
        return self.evaluate(x)

    @classmethod
    def constant(cls, box: Box, c: float, name: str = "") -> "ScalarField":
        return cls(
            lambda pts: np.full(pts.shape[0], float(c)),
            box,
            modulus=lambda delta: 0.0,
            piecewise_on=dyadic_grid(box, 0),
            name=name or f"const({c})",
        )

    def constant_on(self, grid: GridSpec) -> bool:
        """True if the field is known to be constant on every cell of ``grid``."""
        own = self.piecewise_on
        if own is None or own.box != grid.box:
            return False
        if own.is_dyadic and grid.is_dyadic:
            return grid.level >= own.level
        return own.same_as(grid)


def sample_midpoints(f: ScalarField, grid: GridSpec) -> GridFunction:
    """Grid function with the field's value at every cell midpoint."""
    if f.box != grid.box:
        raise GridMismatchError(f"field lives on {f.box}, grid on {grid.box}")
    return GridFunction(grid, f.evaluate(grid.points()))


def _gauss_rule(order: int):
    if order < 1:
        raise DomainError(f"quadrature order must be >= 1, got {order}")
    nodes, weights = special.roots_legendre(order)
    return (nodes + 1.0) / 2.0, weights / 2.0


def cell_integrals(integrand: Callable[[np.ndarray], np.ndarray], grid: GridSpec,
                   order: int = QUAD_ORDER) -> np.ndarray:
    """Tensor Gauss-Legendre approximation of the integral over every cell.

    ``integrand`` maps an array of points ``(..., d)`` to values ``(...)``.
    """
    nodes, weights = _gauss_rule(order)
    lows = [b[:-1] for b in grid.breakpoints]
    lengths = grid.cell_lengths()
    total = np.zeros(grid.shape)
    # One full-grid evaluation per tensor node keeps memory at O(cells).
    for combo in itertools.product(range(order), repeat=grid.dim):
        coords = [lows[i] + nodes[k] * lengths[i] for i, k in enumerate(combo)]
        pts = np.stack(np.meshgrid(*coords, indexing="ij"), axis=-1)
        weight = float(np.prod([weights[k] for k in combo]))
        total += weight * np.asarray(integrand(pts), dtype=float).reshape(grid.shape)
    return total * grid.cell_volumes()


def cell_average(f: ScalarField, grid: GridSpec, order: int = QUAD_ORDER) -> GridFunction:
    """Per-cell mean of the field by tensor Gauss-Legendre quadrature."""
    if f.box != grid.box:
        raise GridMismatchError(f"field lives on {f.box}, grid on {grid.box}")
    return GridFunction(grid, cell_integrals(f.evaluate, grid, order) / grid.cell_volumes())


def lift(values: GridFunction) -> ScalarField:
    """The cell-wise constant field x -> values[cell_of(grid, x)]."""
    grid = values.grid
    table = values.values

    def evaluator(pts):
        idx = cell_index(grid, pts)
        return table[tuple(idx[:, i] for i in range(grid.dim))]

    return ScalarField(evaluator, grid.box, regularity="bounded", piecewise_on=grid, name="lift")


def refine(values: GridFunction, grid: GridSpec) -> GridFunction:
    """Resample a grid-constant function on ``grid`` (exact when ``grid`` refines it)."""
    if values.grid.same_as(grid):
        return values
    return sample_midpoints(lift(values), grid)


# ═════════════════════════════════════════════════════════════════════════════
# GRIDS AROUND A POINT
# ═════════════════════════════════════════════════════════════════════════════

# Coordinates with a reduced denominator up to this use the prime-denominator
# construction; others use the smallest prime keeping x0 off every face.
_MAX_DENOMINATOR = 1000


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    k = 3
    while k * k <= n:
        if n % k == 0:
            return False
        k += 2
    return True


def _next_prime(n: int) -> int:
    n = max(n, 2)
    while not _is_prime(n):
        n += 1
    return n


def _denominator(t: float) -> int | None:
    frac = Fraction(t).limit_denominator(_MAX_DENOMINATOR)
    if abs(float(frac) - t) <= 1e-12:
        return frac.denominator
    return None


def _off_hyperplanes(t: float, p: int) -> bool:
    k = round(t * p)
    return k in (0, p) or abs(t * p - k) > 1e-9 * p


def grid_around_point(box: Box, x0, eps: float) -> GridSpec:
    """Equidistant grid with len_G <= eps and x0 off every interior grid hyperplane.

    Along axis i the cell count is the smallest prime p_i >= (b_i - a_i)/eps
    that is also >= n_i + 1, where n_i is the reduced denominator of
    (x0_i - a_i)/(b_i - a_i); such a grid never puts x0 on a cell face.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if not box.contains(x0):
        raise DomainError(f"{x0.tolist()} lies outside {box}")
    counts = []
    for i in range(box.dim):
        length = box.hi[i] - box.lo[i]
        t = min(max((x0[i] - box.lo[i]) / length, 0.0), 1.0)
        bound = max(1, math.ceil(length / eps - 1e-12))
        n_i = _denominator(t)
        if n_i is not None:
            counts.append(_next_prime(max(bound, n_i + 1)))
            continue
        p = _next_prime(bound)
        while not _off_hyperplanes(t, p):
            p = _next_prime(p + 1)
        counts.append(p)
    return equidistant_grid(box, counts)


# ═════════════════════════════════════════════════════════════════════════════
# NORMS
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Norms:
    l2_weighted: float
    sup: float


def _on_common_grid(*fns: GridFunction | None):
    present = [g for g in fns if g is not None]
    target = present[0].grid
    for g in present[1:]:
        if g.grid.same_as(target):
            continue
        target = common_refinement(target, g.grid)
    return target, [None if g is None else refine(g, target) for g in fns]


def norms(g1: GridFunction, g2: GridFunction, w: GridFunction | None = None) -> Norms:
    """Weighted L2 and sup norms of g1 - g2, exact on the common refinement."""
    grid, (a, b, wr) = _on_common_grid(g1, g2, w)
    diff = a.values - b.values
    weight = 1.0 if wr is None else wr.values
    l2 = math.sqrt(float(np.sum(diff ** 2 * weight * grid.cell_volumes())))
    sup = float(np.abs(diff).max()) if diff.size else 0.0
    return Norms(l2, sup)
