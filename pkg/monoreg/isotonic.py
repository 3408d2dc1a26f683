"""
isotonic — Exact weighted least-squares isotonic regression on grids.

Solves

    minimize  sum_x w(x) (f(x) - g(x))^2   over sigma-monotone grid vectors g

by slicing along free axes, orienting antitone axes, and solving each active
sub-lattice with weighted PAVA (one non-trivial axis) or exact recursive
partitioning (several axes). Partitioning splits a block at its weighted
mean along the upper set of largest positive residual mass; that maximum
closure is enumerated for tiny blocks and solved as a totally unimodular
linear program otherwise. Large lattices are warm-started with axis-cyclic
Dykstra sweeps and polished into exact blocks.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import optimize, sparse
from scipy.sparse import csgraph

from .config import (
    CERT_TOL, CLOSURE_ENUM_POINTS, DYKSTRA_MAX_SWEEPS, DYKSTRA_TOL, ENUM_CAP,
    PARTITION_MAX_POINTS, POLISH_MAX_ROUNDS,
)
from .errors import (
    DimensionError, DomainError, EnumerationCapError, GridMismatchError,
    MonoregError, WeightBoundError,
)
from .grid import GridFunction
from .order import (
    Signature, covering_edges, is_monotone, max_violation, upper_set_table, upward_closure,
)

logger = logging.getLogger(__name__)

Engine = Literal["auto", "partition", "dykstra"]

# Values on the normalized scale closer than this are pooled into one block.
_MERGE_TOL = 1e-12


# ═════════════════════════════════════════════════════════════════════════════
# RESULTS
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Certificate:
    """Outcome of the optimality checks; failing checks are data, not errors."""

    monotone: bool
    max_violation: float
    orthogonality_residual: float
    integral_residual: float
    worst_upper_violation: float
    worst_lower_violation: float
    method: str
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "tol": self.tol,
            "method": self.method,
            "monotone": self.monotone,
            "max_violation": self.max_violation,
            "orthogonality_residual": self.orthogonality_residual,
            "integral_residual": self.integral_residual,
            "worst_upper_violation": self.worst_upper_violation,
            "worst_lower_violation": self.worst_lower_violation,
        }


@dataclass(frozen=True, eq=False)
class SolveResult:
    """Fitted monotone values with their level blocks and objective.

    ``labels`` numbers the level sets {f* = c} in increasing order of c;
    ``block_values[k]`` is the common fitted value of block k.
    """

    fitted: GridFunction
    labels: np.ndarray
    block_values: np.ndarray
    objective: float
    engine: str
    certificate: Certificate | None = field(default=None)

    @property
    def n_blocks(self) -> int:
        return int(self.block_values.size)

    def blocks(self) -> list[np.ndarray]:
        """Flat (C-order) grid indices of every level block."""
        flat = self.labels.reshape(-1)
        order = np.argsort(flat, kind="stable")
        cuts = np.cumsum(np.bincount(flat, minlength=self.n_blocks))[:-1]
        return np.split(order, cuts)

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "objective": self.objective,
            "n_blocks": self.n_blocks,
            "block_values": self.block_values.tolist(),
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
        }


# ═════════════════════════════════════════════════════════════════════════════
# HELPERS
# ═════════════════════════════════════════════════════════════════════════════

def _pow2_scale(*arrays) -> float:
    """Smallest power of two >= the largest magnitude (1.0 for all-zero input)."""
    top = max((float(np.abs(a).max()) if np.size(a) else 0.0) for a in arrays)
    if top == 0.0 or not math.isfinite(top):
        return 1.0
    _, exp = math.frexp(top)
    return math.ldexp(1.0, exp)


def _block_means(f, w, labels, n_blocks) -> np.ndarray:
    """Weighted block means; blocks with a single distinct value keep it exactly."""
    num = np.bincount(labels, weights=w * f, minlength=n_blocks)
    den = np.bincount(labels, weights=w, minlength=n_blocks)
    lo = np.full(n_blocks, np.inf)
    hi = np.full(n_blocks, -np.inf)
    np.minimum.at(lo, labels, f)
    np.maximum.at(hi, labels, f)
    means = np.clip(num / den, lo, hi)
    flat = lo == hi
    means[flat] = lo[flat]
    return means


def _components(n, edges, keep) -> tuple[np.ndarray, int]:
    """Connected components of the graph on n points using the kept edges."""
    chosen = edges[keep]
    graph = sparse.coo_matrix(
        (np.ones(len(chosen)), (chosen[:, 0], chosen[:, 1])), shape=(n, n)
    )
    n_comp, labels = csgraph.connected_components(graph, directed=False)
    return labels.astype(np.int64), int(n_comp)


def _increasing(k: int) -> Signature:
    return Signature((1,) * k)


class _SliceView:
    """Canonical view of a grid array: antitone axes flipped, free axes first.

    ``forward`` maps an array of the grid's shape to ``(n_slices, *active_shape)``
    with every active axis increasing; ``backward`` inverts it.
    """

    def __init__(self, shape: tuple[int, ...], sig: Signature):
        sig.check_dim(len(shape))
        self.shape = shape
        self.flip = tuple(i for i, s in enumerate(sig.dirs) if s < 0)
        self.perm = sig.free + sig.active
        self.free_shape = tuple(shape[i] for i in sig.free)
        self.active_shape = tuple(shape[i] for i in sig.active)
        self.n_slices = int(np.prod(self.free_shape)) if self.free_shape else 1

    def forward(self, a: np.ndarray) -> np.ndarray:
        if self.flip:
            a = np.flip(a, axis=self.flip)
        return a.transpose(self.perm).reshape((self.n_slices,) + self.active_shape)

    def backward(self, b: np.ndarray) -> np.ndarray:
        a = b.reshape(self.free_shape + self.active_shape).transpose(np.argsort(self.perm))
        if self.flip:
            a = np.flip(a, axis=self.flip)
        return np.ascontiguousarray(a)

    def locate(self, index) -> tuple[int, int]:
        """(slice number, flat position in the active lattice) of a grid index."""
        idx = [int(k) for k in index]
        for axis in self.flip:
            idx[axis] = self.shape[axis] - 1 - idx[axis]
        free = [idx[i] for i in self.perm[: len(self.free_shape)]]
        active = [idx[i] for i in self.perm[len(self.free_shape):]]
        s = int(np.ravel_multi_index(free, self.free_shape)) if free else 0
        p = int(np.ravel_multi_index(active, self.active_shape)) if active else 0
        return s, p


def _check_pair(f: GridFunction, w: GridFunction, sig: Signature):
    if not f.grid.same_as(w.grid):
        raise GridMismatchError("f and w must live on the same grid")
    sig.check_dim(f.grid.dim)
    w.check_weight()


# ═════════════════════════════════════════════════════════════════════════════
# UNIVARIATE PAVA
# ═════════════════════════════════════════════════════════════════════════════

def pava_1d(f, w) -> np.ndarray:
    """Weighted nondecreasing least-squares fit by pool-adjacent-violators."""
    f = np.asarray(f, dtype=float).reshape(-1)
    w = np.asarray(w, dtype=float).reshape(-1)
    if f.size == 0:
        raise DomainError("pava_1d needs at least one value")
    if f.shape != w.shape:
        raise DimensionError(f"f has {f.size} values, w has {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w <= 0):
        raise WeightBoundError("PAVA weights must be finite and strictly positive")
    res = optimize.isotonic_regression(f, weights=w, increasing=True)
    starts = np.asarray(res.blocks[:-1])
    labels = np.repeat(np.arange(starts.size), np.diff(np.asarray(res.blocks)))
    return _block_means(f, w, labels, starts.size)[labels]


def _pava_along(y: np.ndarray, w: np.ndarray, axis: int) -> np.ndarray:
    ym = np.moveaxis(y, axis, -1)
    wm = np.moveaxis(w, axis, -1)
    rows_y = ym.reshape(-1, ym.shape[-1])
    rows_w = wm.reshape(-1, wm.shape[-1])
    out = np.empty_like(rows_y)
    for r in range(rows_y.shape[0]):
        out[r] = optimize.isotonic_regression(rows_y[r], weights=rows_w[r]).x
    return np.moveaxis(out.reshape(ym.shape), -1, axis)


# ═════════════════════════════════════════════════════════════════════════════
# MAXIMUM CLOSURE
# ═════════════════════════════════════════════════════════════════════════════

def max_closure(gains: np.ndarray) -> tuple[np.ndarray, float]:
    """Upper set of an increasing lattice maximizing the summed gains.

    Returns the mask (same shape as ``gains``) and its total gain (>= 0).
    """
    shape = gains.shape
    n = gains.size
    flat = gains.reshape(-1)
    if n <= CLOSURE_ENUM_POINTS:
        table = upper_set_table(shape, _increasing(len(shape)), ENUM_CAP)
        totals = table @ flat
        k = int(np.argmax(totals))
        return table[k].reshape(shape), float(totals[k])

    top = float(np.abs(flat).max())
    if top == 0.0:
        return np.zeros(shape, dtype=bool), 0.0
    edges = covering_edges(shape, _increasing(len(shape)))
    m = len(edges)
    rows = np.repeat(np.arange(m), 2)
    cols = edges.reshape(-1)
    data = np.tile([1.0, -1.0], m)
    a_ub = sparse.csr_matrix((data, (rows, cols)), shape=(m, n))
    res = optimize.linprog(
        -flat / top, A_ub=a_ub, b_ub=np.zeros(m), bounds=(0.0, 1.0),
        method="highs-ds",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise MonoregError(f"maximum-closure LP failed: {res.message}")
    chosen = upward_closure(res.x.reshape(shape) > 0.5, _increasing(len(shape))).mask
    gain = float(flat[chosen.reshape(-1)].sum())
    if gain < 0.0:
        return np.zeros(shape, dtype=bool), 0.0
    return chosen, gain


def _best_upper_subset(members, f, w, c, shape) -> np.ndarray | None:
    """Members forming the upper subset of largest positive mass of w (f - c)."""
    coords = np.array(np.unravel_index(members, shape))
    lo = coords.min(axis=1)
    sub_shape = tuple(int(k) for k in coords.max(axis=1) - lo + 1)
    local = tuple(coords - lo[:, None])
    gains = np.zeros(sub_shape)
    gains[local] = w[members] * (f[members] - c)
    mask, gain = max_closure(gains)
    if gain <= _MERGE_TOL * float(w[members].sum()):
        return None
    chosen = mask[local]
    if chosen.all() or not chosen.any():
        return None
    return members[chosen]


# ═════════════════════════════════════════════════════════════════════════════
# LATTICE ENGINES
# ═════════════════════════════════════════════════════════════════════════════

def _partition(f, w, shape) -> np.ndarray:
    """Exact regression by recursive mean splits along maximum closures."""
    n = f.size
    values = np.empty(n)
    stack = [np.arange(n)]
    while stack:
        members = stack.pop()
        c = _block_means(f[members], w[members], np.zeros(members.size, dtype=np.int64), 1)[0]
        if members.size == 1:
            values[members] = c
            continue
        upper = _best_upper_subset(members, f, w, c, shape)
        if upper is None:
            values[members] = c
            continue
        lower = np.setdiff1d(members, upper, assume_unique=True)
        stack.append(lower)
        stack.append(upper)
    return values


def _dykstra(g, w, max_sweeps, tol) -> tuple[np.ndarray, int]:
    x = g.copy()
    increments = [np.zeros_like(g) for _ in range(g.ndim)]
    sig = _increasing(g.ndim)
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        previous = x
        for axis in range(g.ndim):
            if g.shape[axis] < 2:
                continue
            y = x + increments[axis]
            x = _pava_along(y, w, axis)
            increments[axis] = y - x
        if np.abs(x - previous).max() <= tol and max_violation(x, sig) <= tol:
            break
    return x, sweep


def dykstra_axes(f: GridFunction, w: GridFunction, sig: Signature,
                 max_sweeps: int = DYKSTRA_MAX_SWEEPS, tol: float = DYKSTRA_TOL):
    """Axis-cyclic PAVA sweeps with Dykstra corrections.

    Converges to the regression as sweeps grow; returns the iterate and the
    number of sweeps used. Not exact on its own, see ``solve``.
    """
    _check_pair(f, w, sig)
    view = _SliceView(f.grid.shape, sig)
    if not sig.active:
        return f, 0
    gs = view.forward(f.values)
    ws = view.forward(w.values)
    out = np.empty_like(gs)
    used = 0
    for s in range(view.n_slices):
        out[s], sweeps = _dykstra(gs[s], ws[s], max_sweeps, tol)
        used = max(used, sweeps)
    return f.with_values(view.backward(out)), used


def _polish(f, w, shape, approx, rounds) -> np.ndarray | None:
    """Turn an approximate fit into exact blocks by pooling and splitting.

    Returns None when the rounds run out.
    """
    n = f.size
    edges = covering_edges(shape, _increasing(len(shape)))
    close = np.abs(approx[edges[:, 0]] - approx[edges[:, 1]]) <= 1e-9
    labels, n_blocks = _components(n, edges, close)
    for r in range(rounds):
        means = _block_means(f, w, labels, n_blocks)
        vals = means[labels]
        drop = vals[edges[:, 0]] - vals[edges[:, 1]]
        if np.any(drop > 0):
            # pool the worst violators first
            pool = drop >= 0.5 * drop.max()
            pairs = np.stack([labels[edges[pool, 0]], labels[edges[pool, 1]]], axis=1)
            merged, n_blocks = _components(n_blocks, pairs, np.ones(len(pairs), dtype=bool))
            labels = merged[labels]
            continue
        order = np.argsort(labels, kind="stable")
        cuts = np.cumsum(np.bincount(labels, minlength=n_blocks))[:-1]
        next_label = n_blocks
        split = False
        for b, members in enumerate(np.split(order, cuts)):
            if members.size < 2:
                continue
            upper = _best_upper_subset(members, f, w, means[b], shape)
            if upper is not None:
                labels[upper] = next_label
                next_label += 1
                split = True
        if not split:
            logger.debug("polish settled after %d rounds into %d blocks", r + 1, n_blocks)
            return vals
        _, labels = np.unique(labels, return_inverse=True)
        n_blocks = int(labels.max()) + 1
    return None


def _canonical(f, w, values, shape) -> np.ndarray:
    """Pool neighbouring blocks whose values agree to rounding."""
    edges = covering_edges(shape, _increasing(len(shape)))
    if not len(edges):
        return values
    near = np.abs(values[edges[:, 0]] - values[edges[:, 1]]) <= _MERGE_TOL
    if not np.any(near & (values[edges[:, 0]] != values[edges[:, 1]])):
        return values
    labels, n_blocks = _components(f.size, edges, near)
    pooled = _block_means(f, w, labels, n_blocks)[labels]
    if is_monotone(pooled.reshape(shape), _increasing(len(shape))):
        return pooled
    return values


def _solve_lattice(g, w, engine: Engine) -> np.ndarray:
    shape = g.shape
    n = g.size
    f = g.reshape(-1)
    wf = w.reshape(-1)
    if n == 1:
        return g.copy()
    long_axes = [k for k in shape if k > 1]
    if len(long_axes) == 1:
        values = pava_1d(f, wf)
    elif engine == "partition" or (engine == "auto" and n <= PARTITION_MAX_POINTS):
        values = _partition(f, wf, shape)
    else:
        approx, sweeps = _dykstra(g, w, DYKSTRA_MAX_SWEEPS, DYKSTRA_TOL)
        logger.debug("dykstra warm start: %d sweeps on %s", sweeps, shape)
        values = _polish(f, wf, shape, approx.reshape(-1), POLISH_MAX_ROUNDS)
        if values is None:
            logger.debug("polish did not settle on %s; partitioning from scratch", shape)
            values = _partition(f, wf, shape)
    return _canonical(f, wf, values, shape).reshape(shape)


def _solve_canonical(fv: np.ndarray, wv: np.ndarray, sig: Signature, engine: Engine) -> np.ndarray:
    if not sig.active or is_monotone(fv, sig):
        return fv.copy()
    scale = _pow2_scale(fv)
    view = _SliceView(fv.shape, sig)
    gs = view.forward(fv / scale)
    ws = view.forward(wv)
    out = np.empty_like(gs)
    for s in range(view.n_slices):
        if is_monotone(gs[s], _increasing(gs[s].ndim)):
            out[s] = gs[s]
        else:
            out[s] = _solve_lattice(gs[s], ws[s], engine)
    return view.backward(out) * scale


# ═════════════════════════════════════════════════════════════════════════════
# PUBLIC SOLVER
# ═════════════════════════════════════════════════════════════════════════════

def solve(f: GridFunction, w: GridFunction, sig: Signature, *, engine: Engine = "auto",
          certify_result: bool = True, tol: float = CERT_TOL) -> SolveResult:
    """Weighted least-squares sigma-monotone fit of f on its grid."""
    _check_pair(f, w, sig)
    if engine not in ("auto", "partition", "dykstra"):
        raise DomainError(f"unknown engine {engine!r}")
    # The orientation whose first active direction is +1 is computed; the
    # mirrored problem is its exact negation.
    first = next((s for s in sig.dirs if s != 0), 0)
    if first < 0:
        fitted = -_solve_canonical(-f.values, w.values, -sig, engine)
    else:
        fitted = _solve_canonical(f.values, w.values, sig, engine)
    block_values, labels = np.unique(fitted, return_inverse=True)
    labels = labels.reshape(fitted.shape)
    objective = float(np.sum(w.values * (f.values - fitted) ** 2))
    result = SolveResult(f.with_values(fitted), labels, block_values, objective, engine)
    if certify_result:
        result = SolveResult(
            result.fitted, labels, block_values, objective, engine,
            certify(f, w, result, sig, tol),
        )
    return result


# ═════════════════════════════════════════════════════════════════════════════
# MIN-MAX AVERAGING ORACLE
# ═════════════════════════════════════════════════════════════════════════════

def _averages_table(fs, ws, shape, cap):
    """Weighted means over every (lower set, upper set) intersection."""
    table = upper_set_table(shape, _increasing(len(shape)), cap).astype(float)
    lower = 1.0 - table
    num = (lower * (ws * fs)) @ table.T
    den = (lower * ws) @ table.T
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = num / den
    return avg, table.astype(bool)


def _minmax_at(avg, upper, p, variant) -> float:
    rows = ~upper[:, p]  # lower sets holding p
    cols = upper[:, p]   # upper sets holding p
    sub = avg[np.ix_(rows, cols)]
    if variant == "inf-sup":
        return float(sub.max(axis=1).min())
    return float(sub.min(axis=0).max())


def minmax_value(fv: np.ndarray, wv: np.ndarray, sig: Signature, index, *,
                 variant: str = "inf-sup", cap: int = ENUM_CAP) -> float:
    """inf over lower sets L of sup over upper sets U (both holding ``index``)
    of the weighted mean over L ∩ U; ``variant="sup-inf"`` swaps the order."""
    if variant not in ("inf-sup", "sup-inf"):
        raise DomainError(f"unknown variant {variant!r}")
    if not sig.active:
        return float(fv[tuple(index)])
    view = _SliceView(fv.shape, sig)
    s, p = view.locate(index)
    fs = view.forward(fv)[s].reshape(-1)
    ws = view.forward(wv)[s].reshape(-1)
    avg, upper = _averages_table(fs, ws, view.active_shape, cap)
    return _minmax_at(avg, upper, p, variant)


def minmax_oracle(f: GridFunction, w: GridFunction, sig: Signature, *,
                  variant: str = "inf-sup", cap: int = ENUM_CAP) -> GridFunction:
    """Regression values from the discrete min-max averaging formula.

    Independent of ``solve``; needs lower/upper-set enumeration, so every
    slice along the free axes must pass the enumeration cap.
    """
    _check_pair(f, w, sig)
    if variant not in ("inf-sup", "sup-inf"):
        raise DomainError(f"unknown variant {variant!r}")
    if not sig.active:
        return f
    view = _SliceView(f.grid.shape, sig)
    n = int(np.prod(view.active_shape))
    if n >= 63 or 2 ** n > cap:
        raise EnumerationCapError(n, cap)
    fs = view.forward(f.values).reshape(view.n_slices, -1)
    ws = view.forward(w.values).reshape(view.n_slices, -1)
    out = np.empty_like(fs)
    for s in range(view.n_slices):
        avg, upper = _averages_table(fs[s], ws[s], view.active_shape, cap)
        out[s] = [_minmax_at(avg, upper, p, variant) for p in range(n)]
    return f.with_values(view.backward(out))


# ═════════════════════════════════════════════════════════════════════════════
# CERTIFICATE
# ═════════════════════════════════════════════════════════════════════════════

def _worst_set_masses(r: np.ndarray, sig: Signature) -> tuple[float, float, str]:
    """max over upper sets U of sum_U r, and max over lower sets L of -sum_L r."""
    if not sig.active:
        return float(np.clip(r, 0, None).sum()), float(np.clip(-r, 0, None).sum()), "enumeration"
    view = _SliceView(r.shape, sig)
    rs = view.forward(r)
    n = int(np.prod(view.active_shape))
    enumerate_ok = n <= 20 and 2 ** n <= ENUM_CAP
    upper_total = lower_total = 0.0
    for s in range(view.n_slices):
        if enumerate_ok:
            table = upper_set_table(view.active_shape, _increasing(len(view.active_shape)), ENUM_CAP)
            best = float(max((table @ rs[s].reshape(-1)).max(), 0.0))
        else:
            _, best = max_closure(rs[s])
        total = float(rs[s].sum())
        upper_total += best
        # a lower set is the complement of an upper set
        lower_total += max(best - total, 0.0)
    return upper_total, lower_total, "enumeration" if enumerate_ok else "closure-lp"


def certify(f: GridFunction, w: GridFunction, result: SolveResult, sig: Signature,
            tol: float = CERT_TOL) -> Certificate:
    """Check monotonicity, orthogonality and the upper/lower-set conditions.

    Residuals are measured on values scaled to sup-norm <= 1.
    """
    _check_pair(f, w, sig)
    if not result.fitted.grid.same_as(f.grid):
        raise GridMismatchError("result lives on a different grid")
    fitted = result.fitted.values
    scale = _pow2_scale(f.values, fitted)
    fn = f.values / scale
    sn = fitted / scale
    r = w.values * (fn - sn)
    monotone = is_monotone(fitted, sig)
    orth = abs(float(np.sum(r * sn)))
    integral = abs(float(np.sum(r)))
    upper, lower, method = _worst_set_masses(r, sig)
    passed = monotone and orth <= tol and upper <= tol and lower <= tol
    return Certificate(
        monotone=monotone,
        max_violation=max_violation(fitted, sig),
        orthogonality_residual=orth,
        integral_residual=integral,
        worst_upper_violation=upper,
        worst_lower_violation=lower,
        method=method,
        tol=tol,
        passed=passed,
    )
