import logging
from typing import Tuple

import numpy as np

from apps.core.exceptions import DomainError

from .context import ScanResult, TildePoint, TransformContext, scan_partial

logger = logging.getLogger(__name__)


class TransformService:
    """Coordinate changes on single points; the vectorised forms live on TransformContext"""

    @staticmethod
    def forward_XY(ctx: TransformContext, x: float, y: float) -> Tuple[float, float]:
        """X = f(x, y) and Y = the free coordinate"""
        ctx.require_inside(x, y)
        X, Y = ctx.forward_XY_many(x, y)
        return float(X), float(Y)

    @staticmethod
    def invert_XY(ctx: TransformContext, X: float, Y: float) -> Tuple[float, float]:
        x, y = ctx.invert_XY_many(X, Y)
        return float(x), float(y)

    @staticmethod
    def psi(ctx: TransformContext, X: float, Y: float) -> float:
        """-int dY / f_s along the isotherm X, from its anchor to Y"""
        return float(ctx.psi_many(X, Y))

    @staticmethod
    def forward_tilde(ctx: TransformContext, x: float, y: float) -> TildePoint:
        ctx.require_inside(x, y)
        X, Y = ctx.forward_tilde_many(x, y)
        return TildePoint(float(X), float(Y))

    @staticmethod
    def invert_tilde(ctx: TransformContext, p: TildePoint) -> Tuple[float, float]:
        x, y = ctx.invert_tilde_many(p.X, p.Y)
        return float(x), float(y)

    @staticmethod
    def jacobian_det(ctx: TransformContext, x: float, y: float, h: float) -> float:
        """Central-difference det d(X~, Y~)/d(x, y) with step h on both axes"""
        if not h > 0:
            raise DomainError(f"Stencil step must be positive, got {h!r}")
        return float(ctx.jacobian_det_many(x, y, h, h)[0])

    @staticmethod
    def sign_scan(ctx: TransformContext, points: int = 0) -> ScanResult:
        """Re-run the construction scan, optionally on a finer lattice"""
        if not points:
            return ctx.scan
        name = "f_y" if ctx.y_solve else "f_x"
        return scan_partial(ctx.partial, name, ctx.domain, points)

    @staticmethod
    def round_trip_error(ctx: TransformContext, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-point max coordinate error of invert_tilde(forward_tilde(p))"""
        X_t, Y_t = ctx.forward_tilde_many(x, y)
        xr, yr = ctx.invert_tilde_many(X_t, Y_t)
        return np.maximum(np.abs(xr - x), np.abs(yr - y))


forward_XY = TransformService.forward_XY
invert_XY = TransformService.invert_XY
psi = TransformService.psi
forward_tilde = TransformService.forward_tilde
invert_tilde = TransformService.invert_tilde
jacobian_det = TransformService.jacobian_det
