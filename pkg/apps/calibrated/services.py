import logging
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from django.conf import settings

from apps.core.exceptions import (
    ConfigError,
    GraphError,
    ReconstructionError,
)
from apps.transform.context import TransformContext

from .contours import marching_squares
from .curves import MIN_CURVE_POINTS, CurveSpec, sample_curve
from .graph import GraphFunction

logger = logging.getLogger(__name__)

MIN_CONTOUR_GRID = 16

# X~ samples closer than this (relative to the X~ span) count as one isotherm
DUPLICATE_TOL = 1e-9

GAUGE_NOTE = "S = 0 on the input adiabat"


def default_curve_samples() -> int:
    return settings.ADIABAT_CURVE_SAMPLES


class ScalarField(Protocol):
    """A state function defined on a band of isotherms"""

    ctx: TransformContext

    def contains(self, X_t: npt.ArrayLike) -> np.ndarray: ...

    def evaluate_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class EntropyField:
    """S(x, y) = Y~(x, y) - F(X~(x, y)) on the band where F is defined"""

    ctx: TransformContext
    F: GraphFunction
    adiabat: np.ndarray = field(repr=False)
    gauge: str = GAUGE_NOTE
    mode: str = "calibrated"

    @property
    def valid_range(self) -> Tuple[float, float]:
        return self.F.valid_range

    def contains(self, X_t: npt.ArrayLike) -> np.ndarray:
        return self.F.contains(X_t)

    def evaluate_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray:
        """Vectorised entropy; refuses any point whose X~ is outside F's range"""
        X_t = self.ctx.f.evaluate(x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float))
        F = self.F(X_t)
        _, Y_t = self.ctx.forward_tilde_many(x, y)
        return Y_t - F

    def __call__(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray:
        return self.evaluate_many(x, y)


def build_graph(pts: npt.ArrayLike, ctx: TransformContext, name: str = "F") -> GraphFunction:
    """
    Map adiabat samples into the straightened plane and fit Y~ = F(X~).

    Args:
        pts: (n, 2) samples in curve order
        ctx: transform context the samples live in

    Raises:
        GraphError: fewer than 4 distinct isotherms, or the curve meets one
            isotherm twice
    """
    pts = np.asarray(pts, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GraphError("Adiabat samples must be an (n, 2) array")
    if len(pts) < MIN_CURVE_POINTS:
        raise GraphError(f"Need at least {MIN_CURVE_POINTS} adiabat samples, got {len(pts)}")

    ctx.require_inside(pts[:, 0], pts[:, 1])
    X_t, Y_t = ctx.forward_tilde_many(pts[:, 0], pts[:, 1])

    span = float(X_t.max() - X_t.min())
    tol = DUPLICATE_TOL * max(span, 1e-300)
    order = np.argsort(X_t, kind="stable")
    X_s, Y_s = X_t[order], Y_t[order]

    gaps = np.diff(X_s)
    same = gaps <= tol
    if np.any(same):
        y_tol = DUPLICATE_TOL * max(1.0, float(np.ptp(Y_s)))
        clash = same & (np.abs(np.diff(Y_s)) > y_tol)
        if np.any(clash):
            index = int(np.flatnonzero(clash)[0])
            raise GraphError(
                f"Adiabat is not a graph over X~: it meets the isotherm X~={X_s[index]!r} "
                f"twice (Y~={Y_s[index]!r} and {Y_s[index + 1]!r})"
            )
        logger.warning(f"Merged {int(np.count_nonzero(same))} duplicate adiabat samples")
        keep = np.concatenate([[True], ~same])
        X_s, Y_s = X_s[keep], Y_s[keep]

    # in curve order X~ must move one way; a fold means one isotherm is met twice
    steps = np.diff(X_t)
    steps = steps[np.abs(steps) > tol]
    if steps.size and not (np.all(steps > 0) or np.all(steps < 0)):
        fold = int(np.flatnonzero(np.sign(steps) != np.sign(steps[0]))[0])
        raise GraphError(
            f"Adiabat is not a graph over X~: X~ reverses direction after sample {fold + 1}, "
            f"so some isotherm is met twice"
        )

    if X_s.size < MIN_CURVE_POINTS:
        raise GraphError(f"Need at least {MIN_CURVE_POINTS} distinct X~ values, got {X_s.size}")

    clamped = int(np.count_nonzero(ctx.anchor(X_s) != ctx.Y_ref))
    if clamped:
        logger.warning(
            f"{clamped} of {X_s.size} isotherms on {name} miss Y_ref={ctx.Y_ref!r} inside the "
            f"domain; their anchors are clamped and {name} may have kinks"
        )

    graph = GraphFunction(X_s, Y_s, name=name)
    logger.info(
        f"Built graph {name} on {X_s.size} breakpoints, X~ in "
        f"[{graph.valid_range[0]!r}, {graph.valid_range[1]!r}]"
    )
    return graph


def entropy_grid(
    field: "ScalarField", nx: int, ny: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    S on an nx-by-ny grid over the domain, indexed S[j, i] at (xs[i], ys[j]).

    Cells outside F's band, or whose transform fails, are NaN.
    """
    if nx < 2 or ny < 2:
        raise ConfigError(f"Grid needs at least 2 points per axis, got {nx}x{ny}")
    xs, ys = field.ctx.domain.grid(nx, ny)
    gx, gy = np.meshgrid(xs, ys)
    S = np.full(gx.shape, np.nan)

    X_t = field.ctx.f.evaluate(x=gx, y=gy)
    band = field.contains(X_t)
    if np.any(band):
        S[band] = _evaluate_with_fallback(field, gx[band], gy[band])

    masked = int(np.count_nonzero(np.isnan(S)))
    if masked:
        logger.warning(f"Entropy grid {nx}x{ny}: {masked} cells masked")
    return xs, ys, S


def _evaluate_with_fallback(field: "ScalarField", x: np.ndarray, y: np.ndarray) -> np.ndarray:
    try:
        return field.evaluate_many(x, y)
    except ReconstructionError as e:
        logger.warning(f"Batch entropy evaluation failed ({e.step}: {e.message}); retrying per point")

    values = np.full(x.shape, np.nan)
    for index, (px, py) in enumerate(zip(x, y)):
        try:
            values[index] = field.evaluate_many(px, py)
        except ReconstructionError:
            continue
    return values


class CalibratedService:
    @staticmethod
    def sample_curve(spec: CurveSpec, ctx: TransformContext, n: Optional[int] = None) -> np.ndarray:
        n = default_curve_samples() if n is None else int(n)
        points = sample_curve(spec, ctx, n)
        logger.info(f"Sampled {len(points)} points on {spec.describe()}")
        return points

    @staticmethod
    def build_graph(pts: npt.ArrayLike, ctx: TransformContext) -> GraphFunction:
        return build_graph(pts, ctx)

    @staticmethod
    def reconstruct(
        ctx: TransformContext, adiabat: CurveSpec, n: Optional[int] = None
    ) -> EntropyField:
        """Straighten one adiabat into a graph and build the entropy field from it"""
        points = CalibratedService.sample_curve(adiabat, ctx, n)
        graph = build_graph(points, ctx)
        return EntropyField(ctx=ctx, F=graph, adiabat=points)

    @staticmethod
    def entropy_at(field: EntropyField, x: float, y: float) -> float:
        """
        Y~(x, y) - F(X~(x, y))

        Raises:
            DomainError: (x, y) outside the domain
            OutOfRangeError: X~(x, y) outside F's breakpoints
        """
        field.ctx.require_inside(x, y)
        return float(field.evaluate_many(x, y))

    @staticmethod
    def entropy_grid(field: "ScalarField", nx: int, ny: int):
        return entropy_grid(field, nx, ny)

    @staticmethod
    def level_curves(
        field: "ScalarField", levels: Sequence[float], grid: Tuple[int, int]
    ) -> List[List[np.ndarray]]:
        """One list of polylines per requested level, in the order given"""
        nx, ny = grid
        if nx < MIN_CONTOUR_GRID or ny < MIN_CONTOUR_GRID:
            raise ConfigError(
                f"Contour grid must be at least {MIN_CONTOUR_GRID}x{MIN_CONTOUR_GRID}, got {nx}x{ny}"
            )
        levels = [float(level) for level in levels]
        if not all(np.isfinite(levels)):
            raise ConfigError(f"Levels must be finite, got {levels}")

        xs, ys, S = entropy_grid(field, nx, ny)
        return CalibratedService.contour(xs, ys, S, levels)

    @staticmethod
    def contour(
        xs: np.ndarray, ys: np.ndarray, Z: np.ndarray, levels: Sequence[float]
    ) -> List[List[np.ndarray]]:
        result = []
        for level in levels:
            polylines = marching_squares(xs, ys, Z, level)
            logger.info(f"Level {level!r}: {len(polylines)} polylines")
            result.append(polylines)
        return result

    @staticmethod
    def valid_band(field: EntropyField) -> Tuple[float, float]:
        """Temperature band on which S is defined"""
        return field.F.valid_range


entropy_at = CalibratedService.entropy_at
level_curves = CalibratedService.level_curves
