"""
The straightening engine.

A TransformContext holds the equation of state and everything needed for
the two coordinate changes

    (x, y) -> (X, Y) = (f, free coordinate)
    (X, Y) -> (X~, Y~) = (X, Psi(X, Y)),  Psi(X, Y) = -int dY / f_s

where s is the eliminated ("solved") coordinate: y under y-solve (Y = x) and
x under x-solve (Y = y). All heavy methods are vectorised over numpy arrays.

Psi(X, .) is anchored at Y_ref when the isotherm X reaches Y = Y_ref inside
the domain, otherwise at the end of the isotherm's in-domain stretch nearest
to Y_ref. The anchor only depends on X.
"""

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from apps.core.exceptions import (
    ConfigError,
    DomainError,
    ExpressionDomainError,
    InversionError,
    SignScanError,
)
from apps.core.numerics import adaptive_simpson, find_bracketed_root
from apps.expr.functions import FunctionRegistry
from apps.expr.nodes import Expression
from apps.expr.parser import parse

from .constants import (
    DOMAIN_SLACK,
    EDGE_PAD,
    EDGE_PAD_STEPS,
    SPAN_SAMPLES,
    Orientation,
    default_quad_max_depth,
    default_quad_tol,
    default_root_maxiter,
    default_root_tol,
    default_scan_grid,
    validate_scan_grid,
    validate_tolerance,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Domain:
    """Closed rectangle [x_min, x_max] x [y_min, y_max] of state space"""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        bounds = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not all(np.isfinite(bounds)):
            raise ConfigError(f"Domain bounds must be finite, got {bounds}")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ConfigError(f"Domain must have positive area, got {bounds}")

    @classmethod
    def coerce(cls, value: Union["Domain", Mapping[str, float], Sequence[float]]) -> "Domain":
        if isinstance(value, Domain):
            return value
        if isinstance(value, Mapping):
            return cls(
                float(value["x_min"]),
                float(value["x_max"]),
                float(value["y_min"]),
                float(value["y_max"]),
            )
        x_min, x_max, y_min, y_max = (float(v) for v in value)
        return cls(x_min, x_max, y_min, y_max)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def scale(self) -> float:
        return max(self.width, self.height)

    def contains(self, x: npt.ArrayLike, y: npt.ArrayLike) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        sx = DOMAIN_SLACK * max(1.0, abs(self.x_min), abs(self.x_max))
        sy = DOMAIN_SLACK * max(1.0, abs(self.y_min), abs(self.y_max))
        return (
            (x >= self.x_min - sx)
            & (x <= self.x_max + sx)
            & (y >= self.y_min - sy)
            & (y <= self.y_max + sy)
        )

    def grid(self, nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.x_min, self.x_max, nx), np.linspace(self.y_min, self.y_max, ny)

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "y_min": self.y_min, "y_max": self.y_max}


@dataclass(frozen=True)
class TildePoint:
    """A point (X~, Y~) of the straightened plane"""

    X: float
    Y: float

    def __post_init__(self):
        if not (np.isfinite(self.X) and np.isfinite(self.Y)):
            raise DomainError(f"Straightened coordinates must be finite, got ({self.X}, {self.Y})")


@dataclass(frozen=True)
class ScanResult:
    partial: str
    ok: bool
    sign: int
    minimum: float
    maximum: float
    subregion: Optional[Tuple[float, float, float, float]] = None
    message: str = ""


def scan_partial(partial: Expression, name: str, domain: Domain, points: int) -> ScanResult:
    """Check that ``partial`` is nonzero with one sign on a lattice over the domain"""
    xs, ys = domain.grid(points, points)
    gx, gy = np.meshgrid(xs, ys)
    try:
        values = partial.evaluate(x=gx, y=gy)
    except ExpressionDomainError as e:
        return ScanResult(
            name, False, 0, np.nan, np.nan, domain_tuple(domain), f"{name} undefined: {e.message}"
        )

    minimum, maximum = float(values.min()), float(values.max())
    if minimum > 0 or maximum < 0:
        return ScanResult(name, True, 1 if minimum > 0 else -1, minimum, maximum)

    majority = 1 if np.sum(np.sign(values)) >= 0 else -1
    bad = (np.sign(values) != majority) | (values == 0)
    rows, cols = np.nonzero(bad)
    dx = domain.width / (points - 1)
    dy = domain.height / (points - 1)
    subregion = (
        max(domain.x_min, float(xs[cols.min()]) - dx),
        min(domain.x_max, float(xs[cols.max()]) + dx),
        max(domain.y_min, float(ys[rows.min()]) - dy),
        min(domain.y_max, float(ys[rows.max()]) + dy),
    )
    return ScanResult(
        name,
        False,
        0,
        minimum,
        maximum,
        subregion,
        f"{name} vanishes or changes sign on x in [{subregion[0]!r}, {subregion[1]!r}], "
        f"y in [{subregion[2]!r}, {subregion[3]!r}]",
    )


def domain_tuple(domain: Domain) -> Tuple[float, float, float, float]:
    return (domain.x_min, domain.x_max, domain.y_min, domain.y_max)


@dataclass(frozen=True, eq=False)
class TransformContext:
    f: Expression
    f_x: Expression
    f_y: Expression
    domain: Domain
    orientation: Orientation
    Y_ref: float
    root_tol: float
    quad_tol: float
    quad_max_depth: int
    root_maxiter: int
    scan: ScanResult
    functions: Optional[FunctionRegistry] = field(default=None, repr=False)
    _edge_free: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _edge_low: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    _edge_high: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    @classmethod
    def build(
        cls,
        f: Union[str, Expression],
        domain: Union[Domain, Mapping[str, float], Sequence[float]],
        orientation: Union[Orientation, str] = Orientation.Y_SOLVE,
        Y_ref: Optional[float] = None,
        root_tol: Optional[float] = None,
        quad_tol: Optional[float] = None,
        quad_max_depth: Optional[int] = None,
        scan_grid: Optional[int] = None,
        functions: Optional[FunctionRegistry] = None,
    ) -> "TransformContext":
        """
        Build and validate a context.

        Raises:
            ConfigError: bad domain, orientation, anchor or tolerances
            SignScanError: the eliminated partial vanishes or changes sign
        """
        if isinstance(f, str):
            f = parse(f, functions)
        domain = Domain.coerce(domain)
        try:
            orientation = Orientation(orientation)
        except ValueError:
            raise ConfigError(
                f"Unknown orientation {orientation!r}; use one of {list(Orientation.values)}"
            )

        root_tol = default_root_tol() if root_tol is None else float(root_tol)
        quad_tol = default_quad_tol() if quad_tol is None else float(quad_tol)
        quad_max_depth = default_quad_max_depth() if quad_max_depth is None else int(quad_max_depth)
        scan_grid = default_scan_grid() if scan_grid is None else int(scan_grid)
        try:
            validate_tolerance("root_tol", root_tol)
            validate_tolerance("quad_tol", quad_tol)
            validate_scan_grid(scan_grid)
        except ValueError as e:
            raise ConfigError(str(e))

        y_solve = orientation == Orientation.Y_SOLVE
        free_lo, free_hi = (domain.x_min, domain.x_max) if y_solve else (domain.y_min, domain.y_max)
        Y_ref = free_lo if Y_ref is None else float(Y_ref)
        if not free_lo <= Y_ref <= free_hi:
            raise ConfigError(f"Y_ref={Y_ref!r} lies outside the free range [{free_lo!r}, {free_hi!r}]")

        f_x = f.derivative("x")
        f_y = f.derivative("y")
        name, partial = ("f_y", f_y) if y_solve else ("f_x", f_x)
        scan = scan_partial(partial, name, domain, scan_grid)
        if not scan.ok:
            other_name, other = ("f_x", f_x) if y_solve else ("f_y", f_y)
            other_ok = scan_partial(other, other_name, domain, scan_grid).ok
            if other_ok:
                other_orientation = Orientation.X_SOLVE if y_solve else Orientation.Y_SOLVE
                suggestion = f"{other_name} passes the scan, try orientation '{other_orientation.value}'"
            else:
                suggestion = "restrict the domain rectangle"
            logger.warning(f"Sign scan failed for {f.to_text()}: {scan.message}")
            raise SignScanError(scan.message, subregion=scan.subregion, suggestion=suggestion)

        solved_lo, solved_hi = (domain.y_min, domain.y_max) if y_solve else (domain.x_min, domain.x_max)
        # f is increasing in the solved coordinate when the partial is positive
        edge_low, edge_high = (solved_lo, solved_hi) if scan.sign > 0 else (solved_hi, solved_lo)
        edge_free = np.linspace(free_lo, free_hi, SPAN_SAMPLES)

        def along(edge: float) -> np.ndarray:
            x, y = (edge_free, np.full_like(edge_free, edge))
            return f.evaluate(x=x, y=y) if y_solve else f.evaluate(x=y, y=x)

        ctx = cls(
            f=f,
            f_x=f_x,
            f_y=f_y,
            domain=domain,
            orientation=orientation,
            Y_ref=Y_ref,
            root_tol=root_tol,
            quad_tol=quad_tol,
            quad_max_depth=quad_max_depth,
            root_maxiter=default_root_maxiter(),
            scan=scan,
            functions=functions,
            _edge_free=edge_free,
            _edge_low=along(edge_low),
            _edge_high=along(edge_high),
        )
        logger.info(
            f"Transform context built: f={f.to_text()}, orientation={orientation.value}, "
            f"{name} sign {scan.sign:+d} on {domain_tuple(domain)}"
        )
        return ctx

    @property
    def partial(self) -> Expression:
        """Partial derivative with respect to the eliminated coordinate"""
        return self.f_y if self.y_solve else self.f_x

    @property
    def y_solve(self) -> bool:
        return self.orientation == Orientation.Y_SOLVE

    @property
    def expected_det(self) -> int:
        """Sign of det d(X~, Y~)/d(x, y) fixed by the orientation"""
        return 1 if self.y_solve else -1

    @property
    def free_range(self) -> Tuple[float, float]:
        d = self.domain
        return (d.x_min, d.x_max) if self.y_solve else (d.y_min, d.y_max)

    @property
    def solved_range(self) -> Tuple[float, float]:
        d = self.domain
        return (d.y_min, d.y_max) if self.y_solve else (d.x_min, d.x_max)

    @property
    def _free_xtol(self) -> float:
        lo, hi = self.free_range
        return self.root_tol * max(1.0, hi - lo)

    @property
    def _solved_xtol(self) -> float:
        lo, hi = self.solved_range
        return self.root_tol * max(1.0, hi - lo)

    def state(self, free: npt.ArrayLike, solved: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """(free, solved) coordinates to (x, y)"""
        free = np.asarray(free, dtype=float)
        solved = np.asarray(solved, dtype=float)
        return (free, solved) if self.y_solve else (solved, free)

    def split(self, x: npt.ArrayLike, y: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) to (free, solved) coordinates"""
        return self.state(x, y)

    def require_inside(self, x: npt.ArrayLike, y: npt.ArrayLike) -> None:
        inside = self.domain.contains(x, y)
        if not np.all(inside):
            xb, yb = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            index = int(np.flatnonzero(~inside)[0])
            raise DomainError(
                f"Point ({float(xb.flat[index])!r}, {float(yb.flat[index])!r}) lies outside "
                f"the domain {domain_tuple(self.domain)}"
            )

    # (x, y) <-> (X, Y)

    def forward_XY_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        free, _ = self.split(x, y)
        X = self.f.evaluate(x=x, y=y)
        return X, np.broadcast_to(free, X.shape).copy()

    def _level_residual(self, solved: np.ndarray, X: np.ndarray, free: np.ndarray) -> np.ndarray:
        x, y = self.state(free, solved)
        return self.f.evaluate(x=x, y=y) - X

    def invert_XY_many(
        self, X: npt.ArrayLike, Y: npt.ArrayLike, allow_missing: bool = False
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Solve f(state(Y, s)) = X for the eliminated coordinate s"""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        lo, hi = self.free_range
        slack = DOMAIN_SLACK * max(1.0, abs(lo), abs(hi))
        if np.any((Y < lo - slack) | (Y > hi + slack)):
            raise InversionError(f"Y outside the free range [{lo!r}, {hi!r}]")
        s_lo, s_hi = self.solved_range
        # points on an edge may solve a hair outside it
        pad = max(EDGE_PAD * (s_hi - s_lo), EDGE_PAD_STEPS * self._solved_xtol)
        solved = find_bracketed_root(
            self._level_residual,
            s_lo - pad,
            s_hi + pad,
            args=(X, Y),
            xtol=self._solved_xtol,
            maxiter=self.root_maxiter,
            allow_missing=allow_missing,
            what="level-set inversion",
        )
        solved = np.clip(solved, s_lo, s_hi)
        return self.state(np.broadcast_to(Y, solved.shape), solved)

    # Psi quadrature

    def _integrand(self, Y: np.ndarray, X: np.ndarray) -> np.ndarray:
        x, y = self.invert_XY_many(X, Y)
        return -1.0 / self.partial.evaluate(x=x, y=y)

    def isotherm_span(
        self, X: npt.ArrayLike, allow_missing: bool = False
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Free-coordinate interval on which the isotherm X stays inside the domain"""
        X = np.asarray(X, dtype=float)
        shape = X.shape
        X = X.ravel()
        low, high, free = self._edge_low, self._edge_high, self._edge_free
        slack = DOMAIN_SLACK * np.maximum(1.0, np.abs(X))[:, None]
        valid = (X[:, None] >= low[None, :] - slack) & (X[:, None] <= high[None, :] + slack)
        reachable = valid.any(axis=1)
        if not np.all(reachable) and not allow_missing:
            index = int(np.flatnonzero(~reachable)[0])
            raise InversionError(f"Isotherm X={X[index]!r} does not cross the domain")

        count = free.size
        first = np.argmax(valid, axis=1)
        last = count - 1 - np.argmax(valid[:, ::-1], axis=1)
        start = free[first].copy()
        end = free[last].copy()

        s_lo, s_hi = self.solved_range
        edge_low, edge_high = (s_lo, s_hi) if self.scan.sign > 0 else (s_hi, s_lo)

        def refine(inside: np.ndarray, outside: np.ndarray, mask: np.ndarray) -> np.ndarray:
            below = X[mask] < low[outside[mask]]
            edge = np.where(below, edge_low, edge_high)
            return find_bracketed_root(
                lambda fr, level, s: self._level_residual(s, level, fr),
                free[np.minimum(inside[mask], outside[mask])],
                free[np.maximum(inside[mask], outside[mask])],
                args=(X[mask], edge),
                xtol=self._free_xtol,
                maxiter=self.root_maxiter,
                what="isotherm exit",
            )

        left = reachable & (first > 0)
        if np.any(left):
            start[left] = refine(first, first - 1, left)
        right = reachable & (last < count - 1)
        if np.any(right):
            end[right] = refine(last, last + 1, right)

        start[~reachable] = np.nan
        end[~reachable] = np.nan
        return start.reshape(shape), end.reshape(shape)

    def anchor(self, X: npt.ArrayLike) -> np.ndarray:
        """Lower limit of the Psi integral for each isotherm; exactly Y_ref when reachable"""
        start, end = self.isotherm_span(X)
        return np.clip(self.Y_ref, start, end)

    def psi_from(self, X: npt.ArrayLike, anchor: npt.ArrayLike, Y: npt.ArrayLike) -> np.ndarray:
        return adaptive_simpson(
            self._integrand,
            anchor,
            Y,
            args=(X,),
            tol=self.quad_tol,
            max_depth=self.quad_max_depth,
        )

    def psi_many(self, X: npt.ArrayLike, Y: npt.ArrayLike) -> np.ndarray:
        X, Y = np.broadcast_arrays(np.asarray(X, dtype=float), np.asarray(Y, dtype=float))
        return self.psi_from(X, self.anchor(X), Y)

    # (X, Y) <-> (X~, Y~)

    def forward_tilde_many(self, x: npt.ArrayLike, y: npt.ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
        X, Y = self.forward_XY_many(x, y)
        return X, self.psi_many(X, Y)

    def _psi_residual(
        self, Y: np.ndarray, X: np.ndarray, anchor: np.ndarray, target: np.ndarray
    ) -> np.ndarray:
        return self.psi_from(X, anchor, Y) - target

    def invert_tilde_many(
        self, X_t: npt.ArrayLike, Y_t: npt.ArrayLike
    ) -> Tuple[np.ndarray, np.ndarray]:
        X_t, Y_t = np.broadcast_arrays(np.asarray(X_t, dtype=float), np.asarray(Y_t, dtype=float))
        start, end = self.isotherm_span(X_t)
        anchor = np.clip(self.Y_ref, start, end)
        # span ends are only known to the root tolerance
        lo, hi = self.free_range
        pad = EDGE_PAD_STEPS * self._free_xtol
        Y = find_bracketed_root(
            self._psi_residual,
            np.maximum(start - pad, lo),
            np.minimum(end + pad, hi),
            args=(X_t, anchor, Y_t),
            xtol=self._free_xtol,
            maxiter=self.root_maxiter,
            what="straightened-coordinate inversion",
        )
        return self.invert_XY_many(X_t, np.clip(Y, start, end))

    def jacobian_det_many(
        self, x: npt.ArrayLike, y: npt.ArrayLike, hx: float, hy: float
    ) -> np.ndarray:
        """Central-difference det d(X~, Y~)/d(x, y)"""
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        sx = np.concatenate([x + hx, x - hx, x, x])
        sy = np.concatenate([y, y, y + hy, y - hy])
        self.require_inside(sx, sy)
        X_t, Y_t = self.forward_tilde_many(sx, sy)
        Xp, Xm, Xu, Xd = np.split(X_t, 4)
        Yp, Ym, Yu, Yd = np.split(Y_t, 4)
        dX_dx = (Xp - Xm) / (2 * hx)
        dX_dy = (Xu - Xd) / (2 * hy)
        dY_dx = (Yp - Ym) / (2 * hx)
        dY_dy = (Yu - Yd) / (2 * hy)
        return dX_dx * dY_dy - dX_dy * dY_dx
