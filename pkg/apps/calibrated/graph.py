import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import numpy.typing as npt
from scipy.interpolate import PchipInterpolator

from apps.core.exceptions import GraphError, OutOfRangeError

logger = logging.getLogger(__name__)

# relative slack on the valid range so the end breakpoints themselves evaluate
RANGE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class GraphFunction:
    """
    Monotone-cubic (PCHIP) interpolant through strictly increasing breakpoints.

    Evaluation outside [breakpoints[0], breakpoints[-1]] is refused.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    name: str = "F"
    interpolant: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.breakpoints, dtype=float)
        Y = np.asarray(self.values, dtype=float)
        if X.ndim != 1 or X.shape != Y.shape:
            raise GraphError(f"{self.name}: breakpoints and values must be matching 1-d arrays")
        if X.size < 2:
            raise GraphError(f"{self.name}: need at least 2 breakpoints, got {X.size}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise GraphError(f"{self.name}: breakpoints and values must be finite")
        if np.any(np.diff(X) <= 0):
            raise GraphError(f"{self.name}: breakpoints must be strictly increasing")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "breakpoints", X)
        object.__setattr__(self, "values", Y)
        object.__setattr__(self, "interpolant", PchipInterpolator(X, Y, extrapolate=False))

    @property
    def coefficients(self) -> np.ndarray:
        """Cubic coefficients per interval, highest power first"""
        return self.interpolant.c

    @property
    def valid_range(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    @property
    def _slack(self) -> float:
        lo, hi = self.valid_range
        return RANGE_SLACK * max(1.0, abs(lo), abs(hi))

    def contains(self, X: npt.ArrayLike) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        lo, hi = self.valid_range
        return (X >= lo - self._slack) & (X <= hi + self._slack)

    def _clipped(self, X: npt.ArrayLike) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        inside = self.contains(X)
        if not np.all(inside):
            bad = X[~inside] if X.ndim else X
            raise OutOfRangeError(
                f"{self.name} evaluated at X~={float(np.ravel(bad)[0])!r} outside its breakpoints",
                self.valid_range,
            )
        return np.clip(X, *self.valid_range)

    def __call__(self, X: npt.ArrayLike) -> np.ndarray:
        return self.interpolant(self._clipped(X))

    def derivative(self, X: npt.ArrayLike) -> np.ndarray:
        return self.interpolant(self._clipped(X), nu=1)

    def evaluate_masked(self, X: npt.ArrayLike) -> np.ndarray:
        """Like calling the graph, with NaN instead of an error outside the range"""
        X = np.asarray(X, dtype=float)
        inside = self.contains(X)
        result = np.full(X.shape, np.nan)
        result[inside] = self.interpolant(np.clip(X[inside], *self.valid_range))
        return result

    def as_rows(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.breakpoints, self.values)]
