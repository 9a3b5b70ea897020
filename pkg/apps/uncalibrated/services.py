"""
Two adiabats and the isotherm family give back the adiabat family and the
temperature recalibration phi, with phi' = f1 - f0 on the common X~ range.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
import numpy.typing as npt
from scipy.stats import linregress

from apps.calibrated.curves import CurveSpec
from apps.calibrated.graph import GraphFunction
from apps.calibrated.services import CalibratedService, build_graph, entropy_grid
from apps.core.exceptions import (
    ConfigError,
    CrossingAdiabatsError,
    EmptyOverlapError,
    OutOfRangeError,
)
from apps.core.numerics import adaptive_simpson
from apps.transform.context import TransformContext

logger = logging.getLogger(__name__)

# extra phi nodes spread evenly over the overlap, on top of both graphs' breakpoints
PHI_NODES = 129

GAUGE_NOTE = "normalized entropy is 0 on the first adiabat and 1 on the second; phi = 0 at the left end of the overlap"


@dataclass(frozen=True)
class PowerLaw:
    """f1 - f0 ~ coefficient * X~ ** exponent"""

    coefficient: float
    exponent: float
    r_squared: float

    def as_dict(self) -> dict:
        return {
            "coefficient": self.coefficient,
            "exponent": self.exponent,
            "r_squared": self.r_squared,
        }


@dataclass(frozen=True, eq=False)
class RecalibrationResult:
    ctx: TransformContext
    f0: GraphFunction
    f1: GraphFunction
    phi: GraphFunction
    overlap: Tuple[float, float]
    adiabats: Tuple[np.ndarray, np.ndarray] = field(repr=False)
    gauge: str = GAUGE_NOTE
    mode: str = "uncalibrated"

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.overlap

    def contains(self, X_t: npt.ArrayLike) -> np.ndarray:
        return self.phi.contains(X_t)

    def _require_overlap(self, X_t: np.ndarray) -> None:
        inside = self.contains(X_t)
        if not np.all(inside):
            bad = float(np.ravel(X_t[~inside] if X_t.ndim else X_t)[0])
            raise OutOfRangeError(f"Temperature {bad!r} is outside the adiabats' overlap", self.overlap)

    def evaluate_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray:
        """Normalized entropy (Y~ - f0) / (f1 - f0)"""
        X_t = self.ctx.f.evaluate(x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float))
        self._require_overlap(X_t)
        low = self.f0(X_t)
        gap = self.f1(X_t) - low
        _, Y_t = self.ctx.forward_tilde_many(x, y)
        return (Y_t - low) / gap

    def temperature_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray:
        """Recalibrated temperature phi(f(x, y))"""
        X_t = self.ctx.f.evaluate(x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float))
        self._require_overlap(X_t)
        return self.phi(X_t)

    def phi_table(self) -> np.ndarray:
        return np.column_stack([self.phi.breakpoints, self.phi.values])


def _overlap(f0: GraphFunction, f1: GraphFunction) -> Tuple[float, float]:
    lo = max(f0.valid_range[0], f1.valid_range[0])
    hi = min(f0.valid_range[1], f1.valid_range[1])
    if not hi > lo:
        raise EmptyOverlapError(
            f"The adiabats share no isotherms: X~ ranges {f0.valid_range} and {f1.valid_range} "
            f"do not overlap"
        )
    return lo, hi


def _phi_nodes(f0: GraphFunction, f1: GraphFunction, lo: float, hi: float) -> np.ndarray:
    candidates = np.concatenate(
        [f0.breakpoints, f1.breakpoints, np.linspace(lo, hi, PHI_NODES)]
    )
    nodes = np.unique(candidates[(candidates >= lo) & (candidates <= hi)])
    # drop nodes that would make near-empty intervals
    keep = np.concatenate([[True], np.diff(nodes) > 1e-12 * max(1.0, abs(hi))])
    nodes = nodes[keep]
    nodes[-1] = hi
    return nodes


def _gap(X: np.ndarray, f0: GraphFunction, f1: GraphFunction) -> np.ndarray:
    return f1(X) - f0(X)


def reconstruct_uncalibrated(
    ctx: TransformContext, a0: CurveSpec, a1: CurveSpec, n: Optional[int] = None
) -> RecalibrationResult:
    """
    Build f0, f1, the overlap and phi from two adiabats.

    Raises:
        EmptyOverlapError: the transformed adiabats share no X~ interval
        CrossingAdiabatsError: f1 - f0 changes sign or vanishes on the overlap
    """
    points0 = CalibratedService.sample_curve(a0, ctx, n)
    points1 = CalibratedService.sample_curve(a1, ctx, n)
    f0 = build_graph(points0, ctx, name="f0")
    f1 = build_graph(points1, ctx, name="f1")
    lo, hi = _overlap(f0, f1)

    nodes = _phi_nodes(f0, f1, lo, hi)
    gap = _gap(nodes, f0, f1)
    sign = np.sign(gap)
    if np.any(sign == 0) or np.any(sign != sign[0]):
        index = int(np.flatnonzero((sign == 0) | (sign != sign[0]))[0])
        raise CrossingAdiabatsError(
            f"Adiabats cross inside the overlap near X~={nodes[index]!r}: f1 - f0 changes sign"
        )

    increments = adaptive_simpson(
        lambda X: _gap(X, f0, f1),
        nodes[:-1],
        nodes[1:],
        tol=ctx.quad_tol,
        max_depth=ctx.quad_max_depth,
    )
    values = np.concatenate([[0.0], np.cumsum(increments)])
    if not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise CrossingAdiabatsError("Recalibration phi is not strictly monotone on the overlap")
    phi = GraphFunction(nodes, values, name="phi")
    logger.info(
        f"Recalibration built on overlap [{lo!r}, {hi!r}] with {nodes.size} nodes, "
        f"phi spans [{values.min()!r}, {values.max()!r}]"
    )
    return RecalibrationResult(
        ctx=ctx, f0=f0, f1=f1, phi=phi, overlap=(lo, hi), adiabats=(points0, points1)
    )


class UncalibratedService:
    @staticmethod
    def reconstruct(
        ctx: TransformContext, a0: CurveSpec, a1: CurveSpec, n: Optional[int] = None
    ) -> RecalibrationResult:
        return reconstruct_uncalibrated(ctx, a0, a1, n)

    @staticmethod
    def normalized_entropy_at(res: RecalibrationResult, x: float, y: float) -> float:
        """(Y~ - f0(X~)) / (f1(X~) - f0(X~)); level curves are the adiabats"""
        res.ctx.require_inside(x, y)
        return float(res.evaluate_many(x, y))

    @staticmethod
    def recalibrated_temperature_at(res: RecalibrationResult, x: float, y: float) -> float:
        """phi(f(x, y)), defined up to an affine map"""
        res.ctx.require_inside(x, y)
        return float(res.temperature_many(x, y))

    @staticmethod
    def fit_power_law(res: RecalibrationResult, samples: int = 257) -> PowerLaw:
        """Least-squares fit of log|f1 - f0| against log X~ over the overlap"""
        if samples < 3:
            raise ConfigError(f"Power-law fit needs at least 3 samples, got {samples}")
        lo, hi = res.overlap
        if not lo > 0:
            raise ConfigError(f"Power-law fit needs a positive X~ overlap, got [{lo!r}, {hi!r}]")
        X = np.linspace(lo, hi, samples)
        gap = _gap(X, res.f0, res.f1)
        fit = linregress(np.log(X), np.log(np.abs(gap)))
        law = PowerLaw(
            coefficient=float(np.sign(gap[0]) * np.exp(fit.intercept)),
            exponent=float(fit.slope),
            r_squared=float(fit.rvalue**2),
        )
        logger.info(f"f1 - f0 ~ {law.coefficient!r} * X~^{law.exponent!r} (r^2={law.r_squared!r})")
        return law

    @staticmethod
    def normalized_entropy_grid(res: RecalibrationResult, nx: int, ny: int):
        return entropy_grid(res, nx, ny)

    @staticmethod
    def temperature_grid(
        res: RecalibrationResult, nx: int, ny: int
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """T* on the grid, NaN where f(x, y) leaves the overlap"""
        xs, ys = res.ctx.domain.grid(nx, ny)
        gx, gy = np.meshgrid(xs, ys)
        T = res.phi.evaluate_masked(res.ctx.f.evaluate(x=gx, y=gy))
        masked = int(np.count_nonzero(np.isnan(T)))
        if masked:
            logger.warning(f"Temperature grid {nx}x{ny}: {masked} cells outside the overlap")
        return xs, ys, T


normalized_entropy_at = UncalibratedService.normalized_entropy_at
recalibrated_temperature_at = UncalibratedService.recalibrated_temperature_at
fit_power_law = UncalibratedService.fit_power_law
