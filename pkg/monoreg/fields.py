"""
fields — Builtin test fields and weights for the ``converge`` and ``point`` commands.

Each builtin carries its box, default signature and, where it is known in
closed form, the field's monotone projection under unit weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .grid import Box, ScalarField, dyadic_grid
from .order import Signature


@dataclass(frozen=True)
class Builtin:
    name: str
    field: ScalarField
    signature: Signature
    description: str
    projection: ScalarField | None = None


def _paraboloid_fit(x):
    """Nondecreasing fit of (x - 1/2)^2 on [0, 1]: 1/16 up to 3/4, the data after."""
    return np.where(x <= 0.75, 1.0 / 16.0, (x - 0.5) ** 2)


def _hill_fit(y):
    """Nondecreasing fit of -(y - 1/2)^2 on [0, 1]: the data up to 1/4, -1/16 after."""
    return np.where(y <= 0.25, -((y - 0.5) ** 2), -1.0 / 16.0)


def _field(fn, box, name, modulus=None, regularity="continuous"):
    return ScalarField(fn, box, regularity=regularity, modulus=modulus, name=name)


def _registry() -> dict[str, Builtin]:
    unit1, unit2 = Box.unit(1), Box.unit(2)
    inc1, inc2 = Signature((1,)), Signature((1, 1))
    entries = [
        Builtin(
            "paraboloid1d",
            _field(lambda p: (p[:, 0] - 0.5) ** 2, unit1, "paraboloid1d", modulus=lambda d: d),
            inc1,
            "(x - 1/2)^2 on [0, 1]",
            _field(lambda p: _paraboloid_fit(p[:, 0]), unit1, "paraboloid1d*", modulus=lambda d: d),
        ),
        Builtin(
            "neg-ramp",
            _field(lambda p: -p[:, 0], unit1, "neg-ramp", modulus=lambda d: d),
            inc1,
            "-x on [0, 1]",
            ScalarField.constant(unit1, -0.5, name="neg-ramp*"),
        ),
        Builtin(
            "monotone-plane",
            _field(lambda p: p[:, 0] + p[:, 1], unit2, "monotone-plane", modulus=lambda d: 2 * d),
            inc2,
            "x + y on [0, 1]^2",
            _field(lambda p: p[:, 0] + p[:, 1], unit2, "monotone-plane*", modulus=lambda d: 2 * d),
        ),
        Builtin(
            "paraboloid-plane",
            _field(lambda p: (p[:, 0] - 0.5) ** 2 + p[:, 1], unit2, "paraboloid-plane",
                   modulus=lambda d: 2 * d),
            inc2,
            "(x - 1/2)^2 + y on [0, 1]^2",
            _field(lambda p: _paraboloid_fit(p[:, 0]) + p[:, 1], unit2, "paraboloid-plane*"),
        ),
        Builtin(
            "saddle",
            _field(lambda p: (p[:, 0] - 0.5) ** 2 - (p[:, 1] - 0.5) ** 2, unit2, "saddle",
                   modulus=lambda d: 2 * d),
            inc2,
            "(x - 1/2)^2 - (y - 1/2)^2 on [0, 1]^2",
            _field(lambda p: _paraboloid_fit(p[:, 0]) + _hill_fit(p[:, 1]), unit2, "saddle*"),
        ),
        Builtin(
            "step-mixture",
            _field(lambda p: (p[:, 0] + p[:, 1] < 1.0).astype(float) + 0.5 * p[:, 0], unit2,
                   "step-mixture", regularity="bounded"),
            inc2,
            "1{x + y < 1} + x/2 on [0, 1]^2",
        ),
    ]
    return {b.name: b for b in entries}


FIELDS: dict[str, Builtin] = _registry()


def _checkerboard(box: Box) -> ScalarField:
    grid = dyadic_grid(box, 2)
    lo = np.asarray(box.lo)
    cell = box.lengths / 4.0

    def evaluator(pts):
        idx = np.clip(np.floor((pts - lo) / cell), 0, 3).astype(int)
        return np.where(idx.sum(axis=1) % 2 == 0, 1.0, 4.0)

    return ScalarField(evaluator, box, regularity="bounded", piecewise_on=grid, name="checkerboard")


def _ramp(box: Box) -> ScalarField:
    lo = box.lo[0]
    return ScalarField(lambda pts: 1.0 + (pts[:, 0] - lo), box, modulus=lambda d: d, name="ramp")


WEIGHTS: dict[str, Callable[[Box], ScalarField]] = {
    "one": lambda box: ScalarField.constant(box, 1.0, name="one"),
    "checkerboard": _checkerboard,
    "ramp": _ramp,
}


def get_field(name: str) -> Builtin:
    try:
        return FIELDS[name]
    except KeyError:
        raise DomainError(f"unknown builtin field {name!r} (choose from {', '.join(FIELDS)})") from None


def get_weight(name: str, box: Box) -> ScalarField:
    try:
        make = WEIGHTS[name]
    except KeyError:
        raise DomainError(f"unknown builtin weight {name!r} (choose from {', '.join(WEIGHTS)})") from None
    return make(box)
