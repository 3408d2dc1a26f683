"""
errors — Exception hierarchy for the monotonic regression toolkit.

Certificate and verification failures are reported as data, not raised.
"""


class MonoregError(Exception):
    """Base class for every error raised by the library."""


class DimensionError(MonoregError, ValueError):
    """Point, array or signature dimensions do not agree."""


class GridMismatchError(MonoregError, ValueError):
    """Grids or boxes are incompatible, or lack a required property."""


class WeightBoundError(MonoregError, ValueError):
    """A weight is non-positive or leaves its declared bounds."""


class DomainError(MonoregError, ValueError):
    """An argument lies outside the domain of the operation."""


class EnumerationCapError(MonoregError):
    """Lower/upper-set enumeration refused because the grid is too large."""

    def __init__(self, n_points, cap):
        super().__init__(
            f"refusing to enumerate order ideals of {n_points} points "
            f"(2^{n_points} candidate subsets exceed cap {cap})"
        )
        self.n_points = n_points
        self.cap = cap


class ConvergenceError(MonoregError):
    """A refinement sequence did not settle within its budget."""

    def __init__(self, message, last_values=(), levels_used=0):
        super().__init__(message)
        self.last_values = tuple(last_values)
        self.levels_used = levels_used


class InputFormatError(MonoregError):
    """A grid-function file is malformed."""

    def __init__(self, path, line, message):
        where = f"{path}:{line}" if line else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line
