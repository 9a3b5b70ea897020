"""
Adiabat descriptions and their discretisation into point lists.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from django.db import models

from apps.core.exceptions import (
    ConfigError,
    CurveError,
    ExpressionDomainError,
    InversionError,
)
from apps.core.numerics import find_bracketed_root
from apps.expr.nodes import Expression
from apps.transform.context import TransformContext

logger = logging.getLogger(__name__)

MIN_CURVE_POINTS = 4

# sub-samples per station used to count roots along the solve direction
ROOT_SCAN_SAMPLES = 65


class CurveKind(models.TextChoices):
    IMPLICIT = "implicit", "Implicit g(x, y) = 0"
    EXPLICIT = "explicit", "Explicit y = h(x)"
    POINTS = "points", "Ordered point list"


@dataclass(frozen=True, eq=False)
class CurveSpec:
    """An adiabat given implicitly, explicitly or as samples"""

    kind: CurveKind
    expression: Optional[Expression] = None
    x_range: Optional[Tuple[float, float]] = None
    points: Optional[np.ndarray] = field(default=None, repr=False)
    label: str = ""

    @classmethod
    def implicit(cls, g: Expression, label: str = "") -> "CurveSpec":
        return cls(CurveKind.IMPLICIT, expression=g, label=label)

    @classmethod
    def explicit(
        cls, h: Expression, x_range: Optional[Tuple[float, float]] = None, label: str = ""
    ) -> "CurveSpec":
        if h.depends_on("y") or h.depends_on("t"):
            raise ConfigError("An explicit curve y = h(x) may only use the variable x")
        if x_range is not None and not x_range[1] > x_range[0]:
            raise ConfigError(f"Explicit curve needs x_min < x_max, got {x_range}")
        return cls(CurveKind.EXPLICIT, expression=h, x_range=x_range, label=label)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[float]], label: str = "") -> "CurveSpec":
        data = np.asarray(points, dtype=float)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ConfigError("A point curve needs a list of (x, y) pairs")
        if len(data) < MIN_CURVE_POINTS:
            raise ConfigError(
                f"A point curve needs at least {MIN_CURVE_POINTS} points, got {len(data)}"
            )
        if not np.all(np.isfinite(data)):
            raise ConfigError("Point curve contains non-finite values")
        data = data[np.argsort(data[:, 0], kind="stable")]
        if np.any(np.diff(data[:, 0]) <= 0):
            raise ConfigError("Point curve x values must be strictly monotone")
        return cls(CurveKind.POINTS, points=data, label=label)

    def describe(self) -> str:
        if self.kind == CurveKind.POINTS:
            return f"{len(self.points)} points"
        prefix = "y = " if self.kind == CurveKind.EXPLICIT else ""
        suffix = "" if self.kind == CurveKind.EXPLICIT else " = 0"
        return f"{prefix}{self.expression.to_text()}{suffix}"


def _sample_explicit(spec: CurveSpec, ctx: TransformContext, n: int) -> np.ndarray:
    d = ctx.domain
    lo, hi = spec.x_range or (d.x_min, d.x_max)
    xs = np.linspace(lo, hi, n)
    try:
        ys = spec.expression.evaluate(x=xs)
    except ExpressionDomainError as e:
        raise CurveError(f"Explicit curve cannot be evaluated: {e.message}")
    outside = ~d.contains(xs, ys)
    if np.any(outside):
        index = int(np.flatnonzero(outside)[0])
        raise CurveError(
            f"Explicit curve leaves the domain at x={xs[index]!r} (y={ys[index]!r})",
            station=float(xs[index]),
        )
    return np.column_stack([xs, ys])


def _sample_points(spec: CurveSpec, ctx: TransformContext) -> np.ndarray:
    points = spec.points
    outside = ~ctx.domain.contains(points[:, 0], points[:, 1])
    if np.any(outside):
        x, y = points[int(np.flatnonzero(outside)[0])]
        raise CurveError(f"Curve point ({x!r}, {y!r}) lies outside the domain", station=float(x))
    return points.copy()


@dataclass(frozen=True)
class _Axis:
    """Stations along one coordinate, roots solved along the other"""

    along_x: bool
    station_range: Tuple[float, float]
    solve_range: Tuple[float, float]

    @property
    def name(self) -> str:
        return "x" if self.along_x else "y"

    def values(self, g: Expression, station: np.ndarray, solve: np.ndarray) -> np.ndarray:
        if self.along_x:
            return g.evaluate(x=station, y=solve)
        return g.evaluate(x=solve, y=station)

    def to_points(self, station: np.ndarray, solve: np.ndarray) -> np.ndarray:
        if self.along_x:
            return np.column_stack([station, solve])
        return np.column_stack([solve, station])


def _longest_run(mask: np.ndarray) -> Optional[Tuple[int, int]]:
    best: Optional[Tuple[int, int]] = None
    start = None
    for index, flag in enumerate(list(mask) + [False]):
        if flag and start is None:
            start = index
        elif not flag and start is not None:
            if best is None or index - start > best[1] - best[0] + 1:
                best = (start, index - 1)
            start = None
    return best


def _trace(g: Expression, ctx: TransformContext, n: int, axis: _Axis) -> Optional[np.ndarray]:
    """
    Trace g = 0 on stations along one axis. Returns None when the curve has
    no usable stretch on this axis.
    """
    st_lo, st_hi = axis.station_range
    so_lo, so_hi = axis.solve_range
    scan = np.linspace(st_lo, st_hi, max(8 * n, 257))
    solve_grid = np.linspace(so_lo, so_hi, ROOT_SCAN_SAMPLES)

    try:
        values = axis.values(g, scan[:, None], solve_grid[None, :])
    except ExpressionDomainError as e:
        raise CurveError(f"Curve cannot be evaluated on the domain: {e.message}")

    positive = values > 0
    crossings = np.count_nonzero(positive[:, 1:] != positive[:, :-1], axis=1)
    ambiguous = crossings > 1
    if np.any(ambiguous):
        station = float(scan[int(np.flatnonzero(ambiguous)[0])])
        raise CurveError(
            f"Multiple roots on station {axis.name}={station!r}; restrict the domain "
            f"to isolate one branch",
            station=station,
        )

    run = _longest_run(crossings == 1)
    if run is None:
        return None
    first, last = run
    if np.count_nonzero(crossings == 1) > last - first + 1:
        logger.warning(
            f"Curve {g.to_text()} leaves and re-enters the domain along {axis.name}; "
            f"using its longest stretch"
        )

    def edge_exit(inside: int, outside: int) -> float:
        lo_i, hi_i = sorted((scan[inside], scan[outside]))
        for edge in (so_lo, so_hi):
            a, b = (float(v) for v in axis.values(g, np.array([lo_i, hi_i]), np.array([edge, edge])))
            if a * b <= 0:
                root = find_bracketed_root(
                    lambda s, e: axis.values(g, s, e),
                    lo_i,
                    hi_i,
                    args=(edge,),
                    xtol=ctx.root_tol * max(1.0, st_hi - st_lo),
                    what="curve exit",
                )
                return float(root)
        return float(scan[inside])

    start = edge_exit(first, first - 1) if first > 0 else float(st_lo)
    end = edge_exit(last, last + 1) if last < scan.size - 1 else float(st_hi)
    if not end - start > 1e-6 * (st_hi - st_lo):
        return None

    inset = 1e-9 * (st_hi - st_lo)
    stations = np.linspace(start + (inset if first > 0 else 0.0), end - (inset if last < scan.size - 1 else 0.0), n)
    try:
        solved = find_bracketed_root(
            lambda s, st: axis.values(g, st, s),
            so_lo,
            so_hi,
            args=(stations,),
            xtol=ctx.root_tol * max(1.0, so_hi - so_lo),
            maxiter=ctx.root_maxiter,
            what="curve station",
        )
    except InversionError as e:
        raise CurveError(f"Curve tracing along {axis.name} failed: {e.message}")
    return axis.to_points(stations, solved)


def _sample_implicit(spec: CurveSpec, ctx: TransformContext, n: int) -> np.ndarray:
    d = ctx.domain
    axes = [
        _Axis(True, (d.x_min, d.x_max), (d.y_min, d.y_max)),
        _Axis(False, (d.y_min, d.y_max), (d.x_min, d.x_max)),
    ]
    for axis in axes:
        points = _trace(spec.expression, ctx, n, axis)
        if points is not None:
            logger.info(f"Traced {spec.describe()} on {n} {axis.name}-stations")
            return points
        logger.info(f"No {axis.name}-bracket for {spec.describe()}, trying the other axis")
    raise CurveError(f"Curve {spec.describe()} does not intersect the domain")


def sample_curve(spec: CurveSpec, ctx: TransformContext, n: int) -> np.ndarray:
    """
    n points (x, y) on the curve inside the domain, in curve order.

    Point-list curves are returned as given (sorted by x); n is ignored.
    """
    if n < MIN_CURVE_POINTS:
        raise ConfigError(f"Need at least {MIN_CURVE_POINTS} curve samples, got {n}")
    if spec.kind == CurveKind.EXPLICIT:
        return _sample_explicit(spec, ctx, n)
    if spec.kind == CurveKind.POINTS:
        return _sample_points(spec, ctx)
    return _sample_implicit(spec, ctx, n)


def curve_residual(spec: CurveSpec, points: np.ndarray) -> np.ndarray:
    """|g| for implicit curves, |y - h(x)| for explicit ones"""
    if spec.kind == CurveKind.IMPLICIT:
        return np.abs(spec.expression.evaluate(x=points[:, 0], y=points[:, 1]))
    if spec.kind == CurveKind.EXPLICIT:
        return np.abs(points[:, 1] - spec.expression.evaluate(x=points[:, 0]))
    return np.zeros(len(points))


def as_polyline(points: np.ndarray) -> List[List[float]]:
    return [[float(x), float(y)] for x, y in points]
