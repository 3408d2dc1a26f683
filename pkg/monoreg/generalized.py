"""
generalized — Bregman-type regression objectives and their verification.

For a convex Phi on an interval I with a subgradient selection phi, the
divergence

    Delta(u, v) = Phi(u) - Phi(v) - phi(v) (u - v)

defines the objective J(g) = sum_x Delta(f(x), g(x)) w(x) vol(x). The
ordinary weighted least-squares fit f* minimizes J over all monotone g with
values in I, for every such Phi at once. This module checks that claim
numerically rather than re-optimizing: random monotone candidates must never
beat f*, and the residual f - f* must be orthogonal to every function of f*.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import CERT_TOL, SEED, TRIALS
from .errors import DomainError, GridMismatchError, MonoregError
from .grid import GridFunction
from .isotonic import SolveResult, solve
from .order import Signature, downward_closure, upward_closure

logger = logging.getLogger(__name__)


# ═════════════════════════════════════════════════════════════════════════════
# INTERVALS AND SPECS
# ═════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Interval:
    """Real interval with open or closed, possibly infinite, ends."""

    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        if not (self.lo < self.hi or self.lo == self.hi and self.lo_closed and self.hi_closed):
            raise DomainError(f"empty interval {self}")
        if math.isinf(self.lo) and self.lo_closed or math.isinf(self.hi) and self.hi_closed:
            raise DomainError("infinite interval ends cannot be closed")

    @classmethod
    def real(cls) -> "Interval":
        return cls()

    @classmethod
    def positive(cls) -> "Interval":
        return cls(0.0, math.inf)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, True, True)

    def contains(self, u) -> np.ndarray | bool:
        u = np.asarray(u, dtype=float)
        above = u >= self.lo if self.lo_closed else u > self.lo
        below = u <= self.hi if self.hi_closed else u < self.hi
        out = above & below & ~np.isnan(u)
        return bool(out) if out.ndim == 0 else out

    def contains_all(self, u) -> bool:
        return bool(np.all(self.contains(u)))

    def __str__(self):
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


@dataclass(frozen=True)
class BregmanSpec:
    name: str
    phi_fn: Callable[[np.ndarray], np.ndarray]
    dphi_fn: Callable[[np.ndarray], np.ndarray]
    domain: Interval
    strictly_convex: bool = True


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    return u * np.log(u)


SPECS: dict[str, BregmanSpec] = {
    "square": BregmanSpec("square", lambda u: np.square(u), lambda u: 2.0 * np.asarray(u), Interval.real()),
    "entropy": BregmanSpec("entropy", _xlogx, lambda u: np.log(u) + 1.0, Interval.positive()),
    "exp": BregmanSpec("exp", np.exp, np.exp, Interval.real()),
    "neglog": BregmanSpec("neglog", lambda u: -np.log(u), lambda u: -1.0 / np.asarray(u), Interval.positive()),
}


def get_spec(name: str) -> BregmanSpec:
    try:
        return SPECS[name]
    except KeyError:
        raise DomainError(f"unknown Bregman spec {name!r} (choose from {', '.join(SPECS)})") from None


def bregman(spec: BregmanSpec, u, v):
    """Delta(u, v) = Phi(u) - Phi(v) - phi(v) (u - v); scalar in, scalar out."""
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if not (spec.domain.contains_all(u_arr) and spec.domain.contains_all(v_arr)):
        raise DomainError(f"arguments leave the domain {spec.domain} of {spec.name}")
    out = spec.phi_fn(u_arr) - spec.phi_fn(v_arr) - spec.dphi_fn(v_arr) * (u_arr - v_arr)
    # exact zero on the diagonal; off it the raw value, negative for a non-convex Phi
    out = np.where(u_arr == v_arr, 0.0, out)
    return float(out) if out.ndim == 0 else out


def decomposition_residual(spec: BregmanSpec, r, s, t):
    """|Delta(r,t) - Delta(r,s) - Delta(s,t) - (r - s)(phi(s) - phi(t))|."""
    r, s, t = (np.asarray(a, dtype=float) for a in (r, s, t))
    for a in (r, s, t):
        if not spec.domain.contains_all(a):
            raise DomainError(f"arguments leave the domain {spec.domain} of {spec.name}")
    phi, dphi = spec.phi_fn, spec.dphi_fn

    def delta(a, b):
        return phi(a) - phi(b) - dphi(b) * (a - b)

    out = np.abs(delta(r, t) - delta(r, s) - delta(s, t) - (r - s) * (dphi(s) - dphi(t)))
    return float(out) if out.ndim == 0 else out


def objective(spec: BregmanSpec, f: GridFunction, g: GridFunction, w: GridFunction) -> float:
    """J(g) = sum of Delta(f, g) w over the cells, weighted by cell volume."""
    if not (f.grid.same_as(g.grid) and f.grid.same_as(w.grid)):
        raise GridMismatchError("f, g and w must live on the same grid")
    div = bregman(spec, f.values, g.values)
    return float(np.sum(div * w.values * f.grid.cell_volumes()))


# ═════════════════════════════════════════════════════════════════════════════
# MONOTONE CANDIDATES
# ═════════════════════════════════════════════════════════════════════════════

def _cumulative_candidate(shape, sig: Signature, rng: np.random.Generator) -> np.ndarray:
    g = np.zeros(shape)
    for axis in sig.active:
        steps = rng.exponential(size=shape[axis])
        ramp = np.cumsum(steps) * sig.dirs[axis]
        view = [1] * len(shape)
        view[axis] = shape[axis]
        g = g + ramp.reshape(view)
    for axis in sig.free:
        view = [1] * len(shape)
        view[axis] = shape[axis]
        g = g + rng.normal(size=shape[axis]).reshape(view)
    return g


def _into(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = values.max() - values.min()
    if span == 0:
        return np.full(values.shape, 0.5 * (lo + hi))
    return lo + (values - values.min()) * (hi - lo) / span


def sample_monotone(f: GridFunction, fitted: GridFunction, sig: Signature, domain: Interval,
                    rng: np.random.Generator, kind: str, max_tries: int = 100) -> GridFunction:
    """A random sig-monotone grid function with values inside ``domain``.

    ``kind`` is one of ``projected`` (random values monotonized by a unit-weight
    solve), ``cumulative`` (sums of random increments along the active axes) or
    ``near`` (a small step from ``fitted`` towards another candidate).
    """
    lo, hi = float(f.values.min()), float(f.values.max())
    pad = 0.5 * (hi - lo) + 1.0
    lo_s, hi_s = lo - pad, hi + pad
    if math.isfinite(domain.lo):
        lo_s = max(lo_s, domain.lo + 0.5 * (lo - domain.lo))
    if math.isfinite(domain.hi):
        hi_s = min(hi_s, domain.hi - 0.5 * (domain.hi - hi))
    unit = GridFunction.constant(f.grid, 1.0)
    for _ in range(max_tries):
        if kind == "projected":
            raw = f.with_values(rng.uniform(lo_s, hi_s, size=f.grid.shape))
            values = solve(raw, unit, sig, certify_result=False).fitted.values
        elif kind == "cumulative":
            values = _into(_cumulative_candidate(f.grid.shape, sig, rng), lo_s, hi_s)
        elif kind == "near":
            other = _into(_cumulative_candidate(f.grid.shape, sig, rng), lo_s, hi_s)
            t = 10.0 ** rng.uniform(-3, -1)
            values = (1 - t) * fitted.values + t * other
        else:
            raise DomainError(f"unknown sampler kind {kind!r}")
        if domain.contains_all(values):
            return f.with_values(values)
    raise MonoregError(f"monotone sampler found no candidate inside {domain} after {max_tries} tries")


# ═════════════════════════════════════════════════════════════════════════════
# VERIFICATION
# ═════════════════════════════════════════════════════════════════════════════

_SAMPLER_KINDS = ("projected", "cumulative", "near")


@dataclass(frozen=True)
class VerifyReport:
    spec: str
    trials: int
    seed: int
    objective_star: float
    min_gap: float
    worst_decomposition: float
    uniqueness_violations: int
    failures: int
    passed: bool
    fitted: GridFunction = field(repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "passed": self.passed,
            "trials": self.trials,
            "seed": self.seed,
            "objective_star": self.objective_star,
            "min_gap": self.min_gap,
            "worst_decomposition": self.worst_decomposition,
            "uniqueness_violations": self.uniqueness_violations,
            "failures": self.failures,
        }


def verify_minimizer(spec: BregmanSpec, f: GridFunction, w: GridFunction, sig: Signature,
                     trials: int = TRIALS, seed: int = SEED, tol: float = CERT_TOL) -> VerifyReport:
    """Check that the least-squares fit minimizes J against random monotone g.

    Per candidate g: J(f*) <= J(g) + tol, and
    J(f, g) >= J(f, f*) + J(f*, g) - tol.
    """
    if trials < 1:
        raise DomainError(f"trials must be >= 1, got {trials}")
    if not spec.domain.contains_all(f.values):
        raise DomainError(f"data leave the domain {spec.domain} of {spec.name}")
    fitted = solve(f, w, sig, certify_result=False).fitted
    if not spec.domain.contains_all(fitted.values):
        raise MonoregError("fitted values left the domain of the data")
    rng = np.random.default_rng(seed)
    j_star = objective(spec, f, fitted, w)
    slack = tol * max(1.0, abs(j_star))
    min_gap = math.inf
    worst_dec = 0.0
    uniqueness = 0
    failures = 0
    for k in range(trials):
        g = sample_monotone(f, fitted, sig, spec.domain, rng, _SAMPLER_KINDS[k % len(_SAMPLER_KINDS)])
        j_g = objective(spec, f, g, w)
        gap = j_g - j_star
        min_gap = min(min_gap, gap)
        dec = j_star + objective(spec, fitted, g, w) - j_g
        worst_dec = max(worst_dec, dec)
        if gap < -slack or dec > slack:
            failures += 1
        if spec.strictly_convex and gap <= 1e-12 and np.abs(g.values - fitted.values).max() > 1e-6:
            uniqueness += 1
    passed = failures == 0 and uniqueness == 0
    if not passed:
        logger.warning("%s: %d of %d candidates beat the fit", spec.name, failures + uniqueness, trials)
    return VerifyReport(spec.name, trials, seed, j_star, min_gap, worst_dec,
                        uniqueness, failures, passed, fitted)


# ── Orthogonality to functions of the fit ────────────────────────────────

def identity():
    return lambda u: np.asarray(u, dtype=float)


def constant(c: float = 1.0):
    return lambda u: np.full(np.shape(u), float(c))


def step(c: float):
    """Indicator of [c, inf)."""
    return lambda u: (np.asarray(u) >= c).astype(float)


def ramp(lo: float, hi: float):
    """0 below lo, 1 above hi, linear between."""
    if not lo < hi:
        raise DomainError(f"ramp needs lo < hi, got ({lo}, {hi})")
    return lambda u: np.clip((np.asarray(u, dtype=float) - lo) / (hi - lo), 0.0, 1.0)


def point_mass(c: float):
    """Indicator of {c}."""
    return lambda u: (np.asarray(u) == c).astype(float)


def _fit(f, w, sig, result):
    if result is None:
        return solve(f, w, sig, certify_result=False)
    if not result.fitted.grid.same_as(f.grid):
        raise GridMismatchError("result lives on a different grid")
    return result


def orthogonality_check(f: GridFunction, w: GridFunction, sig: Signature,
                        phi: Callable[[np.ndarray], np.ndarray],
                        result: SolveResult | None = None) -> float:
    """|<f - f*, phi(f*)>_w| over the cells."""
    fitted = _fit(f, w, sig, result).fitted.values
    vols = f.grid.cell_volumes()
    return abs(float(np.sum((f.values - fitted) * phi(fitted) * w.values * vols)))


# ── Level sets ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class BlockRecord:
    value: float
    mean: float
    size: int
    rel_error: float


@dataclass(frozen=True)
class LevelSetReport:
    blocks: tuple[BlockRecord, ...]
    worst_block_error: float
    worst_set_violation: float
    samples: int
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_block_error": self.worst_block_error,
            "worst_set_violation": self.worst_set_violation,
            "samples": self.samples,
            "blocks": [
                {"value": b.value, "mean": b.mean, "size": b.size, "rel_error": b.rel_error}
                for b in self.blocks
            ],
        }


def _mean(f, wv, mask) -> float:
    return float(np.sum(f[mask] * wv[mask]) / np.sum(wv[mask]))


def level_set_report(f: GridFunction, w: GridFunction, sig: Signature, *, samples: int = 32,
                     seed: int = SEED, tol: float = CERT_TOL,
                     result: SolveResult | None = None) -> LevelSetReport:
    """Block means against block values, plus sampled lower/upper set checks.

    For a block value c, a lower set L and an upper set U the weighted means
    satisfy Av(L ∩ {f* >= c}) >= c and Av({f* <= c} ∩ U) <= c.
    """
    res = _fit(f, w, sig, result)
    fitted = res.fitted.values
    wv = w.values * f.grid.cell_volumes()
    fv = f.values
    records = []
    for c in res.block_values:
        mask = fitted == c
        mean = _mean(fv, wv, mask)
        rel = abs(mean - c) / max(abs(c), abs(mean), 1e-300) if mean != c else 0.0
        records.append(BlockRecord(float(c), mean, int(mask.sum()), rel))
    worst_block = max((r.rel_error for r in records), default=0.0)

    rng = np.random.default_rng(seed)
    worst_set = 0.0
    for _ in range(samples):
        seeds = rng.random(f.grid.shape) < rng.uniform(0.02, 0.3)
        lower = downward_closure(seeds, sig).mask
        upper = upward_closure(rng.random(f.grid.shape) < rng.uniform(0.02, 0.3), sig).mask
        for c in res.block_values:
            region = lower & (fitted >= c)
            if region.any():
                worst_set = max(worst_set, c - _mean(fv, wv, region))
            region = (fitted <= c) & upper
            if region.any():
                worst_set = max(worst_set, _mean(fv, wv, region) - c)
    passed = worst_block <= 1e-12 and worst_set <= tol
    return LevelSetReport(tuple(records), worst_block, worst_set, samples, passed)


def interval_preserved(f: GridFunction, fitted: GridFunction, interval: Interval) -> bool:
    """True unless f lies in ``interval`` while the fit leaves it.

    Open ends make this the strict form: f > c everywhere implies f* > c.
    """
    if not interval.contains_all(f.values):
        return True
    return interval.contains_all(fitted.values)
