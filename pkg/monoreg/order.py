"""
order — The signature-induced partial order on grid points.

A signature sigma in {-1, 0, +1}^d orders points by

    x <=_sigma y  iff  sigma_i x_i <= sigma_i y_i  for active axes (sigma_i != 0)
                  and  x_i == y_i                   for free axes   (sigma_i == 0).

On a product grid the order is generated by covering pairs: one step along
one active axis in the direction of sigma_i. Lower and upper sets are
represented as boolean masks over the grid index space.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .config import ENUM_CAP
from .errors import DimensionError, EnumerationCapError


# ═════════════════════════════════════════════════════════════════════════════
# SIGNATURE
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Signature:
    """Per-axis monotonicity direction: +1 isotone, -1 antitone, 0 free."""

    dirs: tuple[int, ...]

    def __post_init__(self):
        dirs = tuple(int(s) for s in self.dirs)
        if len(dirs) < 1:
            raise DimensionError("signature needs at least one axis")
        if any(s not in (-1, 0, 1) for s in dirs):
            raise DimensionError(f"signature entries must be -1, 0 or +1, got {dirs}")
        object.__setattr__(self, "dirs", dirs)

    @classmethod
    def parse(cls, text: str) -> "Signature":
        """Parse ``"+1,0,-1"`` (also accepts ``"+,0,-"``)."""
        tokens = [t.strip() for t in text.split(",") if t.strip()]
        table = {"+": 1, "-": -1, "0": 0}
        dirs = []
        for tok in tokens:
            try:
                dirs.append(table[tok] if tok in table else int(tok))
            except ValueError:
                raise DimensionError(f"bad signature entry {tok!r} in {text!r}") from None
        return cls(tuple(dirs))

    def __len__(self):
        return len(self.dirs)

    def __neg__(self) -> "Signature":
        return Signature(tuple(-s for s in self.dirs))

    def __str__(self):
        return ",".join({1: "+1", 0: "0", -1: "-1"}[s] for s in self.dirs)

    @property
    def active(self) -> tuple[int, ...]:
        """Axes carrying a monotonicity constraint."""
        return tuple(i for i, s in enumerate(self.dirs) if s != 0)

    @property
    def free(self) -> tuple[int, ...]:
        """Axes without constraint; slices along them are independent."""
        return tuple(i for i, s in enumerate(self.dirs) if s == 0)

    def restricted(self) -> "Signature":
        """The signature on the active axes only."""
        return Signature(tuple(self.dirs[i] for i in self.active))

    def check_dim(self, d: int):
        if d != len(self.dirs):
            raise DimensionError(f"signature has {len(self.dirs)} axes, data has {d}")


# ═════════════════════════════════════════════════════════════════════════════
# INDEX SETS
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class IndexSet:
    """A lower or upper set of grid points, stored as a boolean lattice."""

    kind: Literal["lower", "upper"]
    mask: np.ndarray

    def complement(self) -> "IndexSet":
        return IndexSet("upper" if self.kind == "lower" else "lower", ~self.mask)

    def __len__(self):
        return int(self.mask.sum())

    def __contains__(self, index):
        return bool(self.mask[tuple(index)])

    def __eq__(self, other):
        if not isinstance(other, IndexSet):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.kind, self.mask.shape, np.packbits(self.mask).tobytes()))


# ═════════════════════════════════════════════════════════════════════════════
# ORDER RELATION
# ═════════════════════════════════════════════════════════════════════════════

def leq_sigma(x, y, sig: Signature) -> bool:
    """True iff ``x <=_sigma y``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.shape != y.shape:
        raise DimensionError(f"points have dimensions {x.size} and {y.size}")
    sig.check_dim(x.size)
    s = np.asarray(sig.dirs)
    active = s != 0
    if np.any(x[~active] != y[~active]):
        return False
    return bool(np.all(s[active] * x[active] <= s[active] * y[active]))


def _shape_of(grid) -> tuple[int, ...]:
    if isinstance(grid, tuple):
        return grid
    if isinstance(grid, np.ndarray):
        return grid.shape
    return tuple(grid.shape)


def _values_of(g) -> np.ndarray:
    return np.asarray(getattr(g, "values", g), dtype=float)


def is_monotone(g, sig: Signature) -> bool:
    """True iff g(x) <= g(y) on every covering pair of the grid."""
    values = _values_of(g)
    sig.check_dim(values.ndim)
    for axis in sig.active:
        step = np.diff(values, axis=axis) * sig.dirs[axis]
        if np.any(step < 0):
            return False
    return True


def max_violation(g, sig: Signature) -> float:
    """Largest drop g(x) - g(y) over covering pairs x < y (0 when monotone)."""
    values = _values_of(g)
    sig.check_dim(values.ndim)
    worst = 0.0
    for axis in sig.active:
        step = np.diff(values, axis=axis) * sig.dirs[axis]
        if step.size:
            worst = max(worst, float(-step.min()))
    return worst


def covering_edges(shape: tuple[int, ...], sig: Signature) -> np.ndarray:
    """Covering pairs as an (m, 2) array of C-order flat indices (lower, upper)."""
    sig.check_dim(len(shape))
    flat = np.arange(int(np.prod(shape)), dtype=np.int64).reshape(shape)
    chunks = []
    for axis in sig.active:
        if shape[axis] < 2:
            continue
        lo = np.take(flat, np.arange(shape[axis] - 1), axis=axis).reshape(-1)
        hi = np.take(flat, np.arange(1, shape[axis]), axis=axis).reshape(-1)
        if sig.dirs[axis] < 0:
            lo, hi = hi, lo
        chunks.append(np.stack([lo, hi], axis=1))
    if not chunks:
        return np.zeros((0, 2), dtype=np.int64)
    return np.concatenate(chunks, axis=0)


def covering_pairs(grid, sig: Signature) -> list[tuple[int, int]]:
    """Hasse diagram of <=_sigma on the grid, as flat index pairs (x, y) with x ⋖ y."""
    edges = covering_edges(_shape_of(grid), sig)
    return [(int(a), int(b)) for a, b in edges]


# ═════════════════════════════════════════════════════════════════════════════
# ENUMERATION
# ═════════════════════════════════════════════════════════════════════════════

def _check_cap(n: int, cap: int):
    if n >= 63 or 2 ** n > cap:
        raise EnumerationCapError(n, cap)


def _upper_bitmasks(n: int, edges: np.ndarray, rank: np.ndarray) -> list[int]:
    """Every upper set of the DAG (0..n-1, edges) as an int bitmask.

    Points are decided from the top of the order down, so a point may only
    join once all of its covers are in; every branch yields a valid set.
    """
    succ = [0] * n
    for lo, hi in edges:
        succ[int(lo)] |= 1 << int(hi)
    order = sorted(range(n), key=lambda v: (-rank[v], v))
    out: list[int] = []

    def rec(pos, mask):
        if pos == n:
            out.append(mask)
            return
        v = order[pos]
        rec(pos + 1, mask)
        if (succ[v] & ~mask) == 0:
            rec(pos + 1, mask | (1 << v))

    rec(0, 0)
    return out


def _rank(shape: tuple[int, ...], sig: Signature) -> np.ndarray:
    idx = np.indices(shape).reshape(len(shape), -1)
    return (np.asarray(sig.dirs)[:, None] * idx).sum(axis=0)


@functools.lru_cache(maxsize=256)
def upper_set_table(shape: tuple[int, ...], sig: Signature, cap: int = ENUM_CAP) -> np.ndarray:
    """All upper sets of the grid as a read-only (k, n) boolean matrix."""
    n = int(np.prod(shape))
    _check_cap(n, cap)
    masks = _upper_bitmasks(n, covering_edges(shape, sig), _rank(shape, sig))
    bits = np.array(masks, dtype=np.int64)[:, None] >> np.arange(n, dtype=np.int64)[None, :]
    table = (bits & 1).astype(bool)
    table.setflags(write=False)
    return table


def enumerate_upper_sets(grid, sig: Signature, cap: int = ENUM_CAP) -> Iterator[IndexSet]:
    """Yield every upper set of the grid exactly once, the empty set first."""
    shape = _shape_of(grid)
    for row in upper_set_table(shape, sig, cap):
        yield IndexSet("upper", row.reshape(shape).copy())


def enumerate_lower_sets(grid, sig: Signature, cap: int = ENUM_CAP) -> Iterator[IndexSet]:
    """Yield every lower set of the grid exactly once (complements of upper sets)."""
    for upper in enumerate_upper_sets(grid, sig, cap):
        yield upper.complement()


# ═════════════════════════════════════════════════════════════════════════════
# CLOSURES
# ═════════════════════════════════════════════════════════════════════════════

def _closure(mask: np.ndarray, sig: Signature, direction: int) -> np.ndarray:
    out = np.array(mask, dtype=bool, copy=True)
    sig.check_dim(out.ndim)
    # Cumulative OR along each active axis in turn closes under the product order.
    for axis in sig.active:
        s = sig.dirs[axis] * direction
        moved = np.moveaxis(out, axis, -1)
        if s < 0:
            moved = moved[..., ::-1]
        moved = np.logical_or.accumulate(moved, axis=-1)
        if s < 0:
            moved = moved[..., ::-1]
        out = np.moveaxis(moved, -1, axis)
    return out


def upward_closure(mask, sig: Signature) -> IndexSet:
    """Smallest upper set containing ``mask``."""
    return IndexSet("upper", _closure(mask, sig, +1))


def downward_closure(mask, sig: Signature) -> IndexSet:
    """Smallest lower set containing ``mask``."""
    return IndexSet("lower", _closure(mask, sig, -1))


def is_upper_set(mask, sig: Signature) -> bool:
    mask = np.asarray(mask, dtype=bool)
    return bool(np.array_equal(_closure(mask, sig, +1), mask))


def is_lower_set(mask, sig: Signature) -> bool:
    mask = np.asarray(mask, dtype=bool)
    return bool(np.array_equal(_closure(mask, sig, -1), mask))
