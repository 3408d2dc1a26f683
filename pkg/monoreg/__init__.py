"""
monoreg — Weighted least-squares monotonic regression on boxes.

Usage:
    monoreg fit --in data.csv --sig +1,-1      # exact fit of a grid file
    monoreg converge --field paraboloid1d       # refinement with error bounds
    python3 -m monoreg --help                   # CLI flags reference
"""

from .errors import MonoregError
from .grid import Box, GridFunction, GridSpec, ScalarField, dyadic_grid
from .isotonic import SolveResult, certify, minmax_oracle, solve
from .order import Signature

__all__ = [
    "Box",
    "GridFunction",
    "GridSpec",
    "MonoregError",
    "ScalarField",
    "Signature",
    "SolveResult",
    "certify",
    "dyadic_grid",
    "minmax_oracle",
    "solve",
]
