"""
Shared vectorised numerics: a bracketed scalar root solver and an adaptive
Simpson quadrature that works on many intervals at once.

Both routines accept a callable ``fun(z, *args)`` that is evaluated
elementwise on 1-d numpy arrays. ``args`` are broadcast against the problem
shape and only the still-active elements are passed on each call, so ``fun``
must never close over full-size arrays.
"""

import logging
from typing import Callable, Optional, Sequence

import numpy as np
import numpy.typing as npt
from scipy.optimize import elementwise

from apps.core.exceptions import InversionError, QuadratureError

logger = logging.getLogger(__name__)

ArrayFunction = Callable[..., npt.NDArray[np.float64]]

# find_root status codes
_STATUS_CONVERGED = 0
_STATUS_INVALID_BRACKET = -1


def _flatten(*arrays: npt.ArrayLike) -> tuple[tuple[int, ...], list[np.ndarray]]:
    broadcast = np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays])
    shape = broadcast[0].shape
    return shape, [np.ascontiguousarray(b).ravel() for b in broadcast]


def find_bracketed_root(
    fun: ArrayFunction,
    lo: npt.ArrayLike,
    hi: npt.ArrayLike,
    args: Sequence[npt.ArrayLike] = (),
    xtol: float = 1e-12,
    rtol: float = 4 * np.finfo(float).eps,
    maxiter: int = 200,
    allow_missing: bool = False,
    what: str = "root",
) -> np.ndarray:
    """
    Solve fun(z, *args) = 0 elementwise inside [lo, hi].

    Uses SciPy's vectorised Chandrupatla solver (bisection accelerated by
    inverse quadratic / secant steps), which always keeps a valid bracket.

    Returns:
        Array of roots with the broadcast shape of (lo, hi, *args). Elements
        without a sign change are NaN when ``allow_missing`` is set, otherwise
        an InversionError is raised.
    """
    shape, flat = _flatten(lo, hi, *args)
    lo_flat, hi_flat, *arg_flat = flat
    if lo_flat.size == 0:
        return np.empty(shape)

    result = elementwise.find_root(
        fun,
        (lo_flat, hi_flat),
        args=tuple(arg_flat),
        tolerances={"xatol": xtol, "xrtol": rtol, "fatol": 0.0, "frtol": 0.0},
        maxiter=maxiter,
    )

    status = np.asarray(result.status)
    roots = np.asarray(result.x, dtype=float).copy()

    missing = status == _STATUS_INVALID_BRACKET
    if np.any(missing):
        if not allow_missing:
            index = int(np.flatnonzero(missing)[0])
            raise InversionError(
                f"No bracket for {what}: sign does not change on "
                f"[{lo_flat[index]!r}, {hi_flat[index]!r}] "
                f"({int(missing.sum())} of {missing.size} elements)"
            )
        roots[missing] = np.nan

    failed = (status != _STATUS_CONVERGED) & ~missing
    if np.any(failed):
        index = int(np.flatnonzero(failed)[0])
        raise InversionError(
            f"Solver for {what} did not converge (status {int(status[index])}) "
            f"on [{lo_flat[index]!r}, {hi_flat[index]!r}]"
        )

    return roots.reshape(shape)


def adaptive_simpson(
    fun: ArrayFunction,
    a: npt.ArrayLike,
    b: npt.ArrayLike,
    args: Sequence[npt.ArrayLike] = (),
    tol: float = 1e-10,
    max_depth: int = 40,
    min_depth: int = 2,
) -> np.ndarray:
    """
    Integrate fun(z, *args) from a to b elementwise with adaptive Simpson.

    All panels of all integrals at one refinement level are evaluated in a
    single vectorised call. A panel is accepted when the two-half estimate
    agrees with the whole-panel estimate to 15 * eps, where eps starts at
    tol * max(1, |coarse estimate|) and halves at every split; accepted panels
    get the Richardson correction. Reversed limits (b < a) are allowed.
    """
    shape, flat = _flatten(a, b, *args)
    a_flat, b_flat, *arg_flat = flat
    n = a_flat.size
    total = np.zeros(n)
    if n == 0:
        return total.reshape(shape)

    owner = np.arange(n)
    left_end = a_flat
    right_end = b_flat
    mid = 0.5 * (left_end + right_end)

    values = fun(np.concatenate([left_end, mid, right_end]), *[np.tile(p, 3) for p in arg_flat])
    f_left, f_mid, f_right = np.split(np.asarray(values, dtype=float), 3)
    whole = (right_end - left_end) / 6.0 * (f_left + 4.0 * f_mid + f_right)
    eps = tol * np.maximum(1.0, np.abs(whole))
    depth = np.zeros(n, dtype=int)
    params = list(arg_flat)
    panels = 0

    while owner.size:
        quarter_left = 0.5 * (left_end + mid)
        quarter_right = 0.5 * (mid + right_end)
        values = fun(
            np.concatenate([quarter_left, quarter_right]),
            *[np.concatenate([p, p]) for p in params],
        )
        f_ql, f_qr = np.split(np.asarray(values, dtype=float), 2)

        left = (mid - left_end) / 6.0 * (f_left + 4.0 * f_ql + f_mid)
        right = (right_end - mid) / 6.0 * (f_mid + 4.0 * f_qr + f_right)
        refined = left + right
        delta = refined - whole

        if not np.all(np.isfinite(refined)):
            raise QuadratureError("Integrand is not finite on a quadrature panel")

        done = (depth >= min_depth) & (
            (np.abs(delta) <= 15.0 * eps)
            | (np.abs(delta) <= 64.0 * np.finfo(float).eps * np.abs(refined))
        )
        np.add.at(total, owner[done], refined[done] + delta[done] / 15.0)
        panels += int(done.sum())

        pending = ~done
        too_deep = pending & (depth >= max_depth)
        if np.any(too_deep):
            index = int(np.flatnonzero(too_deep)[0])
            raise QuadratureError(
                f"Tolerance {tol!r} not reached at depth {max_depth} on panel "
                f"[{left_end[index]!r}, {right_end[index]!r}]"
            )

        def split(first: np.ndarray, second: np.ndarray) -> np.ndarray:
            return np.concatenate([first[pending], second[pending]])

        owner = split(owner, owner)
        params = [split(p, p) for p in params]
        new_left_end = split(left_end, mid)
        new_right_end = split(mid, right_end)
        mid = split(quarter_left, quarter_right)
        new_f_left = split(f_left, f_mid)
        new_f_right = split(f_mid, f_right)
        f_mid = split(f_ql, f_qr)
        whole = split(left, right)
        eps = split(eps, eps) * 0.5
        depth = split(depth, depth) + 1
        left_end, right_end = new_left_end, new_right_end
        f_left, f_right = new_f_left, new_f_right

    logger.debug(f"Adaptive Simpson: {n} integrals, {panels} accepted panels")
    return total.reshape(shape)


def central_gradient(
    fun: ArrayFunction,
    x: npt.ArrayLike,
    y: npt.ArrayLike,
    h: float,
    scale: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient of a vectorised field fun(x, y)"""
    hx, hy = (h * scale[0], h * scale[1]) if scale else (h, h)
    x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
    stencil = fun(
        np.concatenate([x + hx, x - hx, x, x]),
        np.concatenate([y, y, y + hy, y - hy]),
    )
    f_xp, f_xm, f_yp, f_ym = np.split(np.asarray(stencil, dtype=float), 4)
    return (f_xp - f_xm) / (2.0 * hx), (f_yp - f_ym) / (2.0 * hy)
