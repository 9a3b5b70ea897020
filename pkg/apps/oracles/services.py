"""
Closed-form and brute-force references for the reconstruction.
"""

import logging
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt
from django.conf import settings
from scipy.integrate import solve_ivp
from scipy.spatial.distance import cdist, directed_hausdorff

from apps.core.exceptions import (
    AuditError,
    ConfigError,
    DomainError,
    ReconstructionError,
)
from apps.core.numerics import central_gradient

from .fixtures import Fixture, load_fixture

logger = logging.getLogger(__name__)

FieldFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

ODE_RTOL = 1e-12
ODE_ATOL = 1e-12


def default_stencil_step() -> float:
    return settings.ADIABAT_STENCIL_STEP


def ideal_gas_entropy(
    gamma: float, x: npt.ArrayLike, y: npt.ArrayLike
) -> Union[float, np.ndarray]:
    """S = ln(x * y^gamma) / (gamma - 1)"""
    if gamma == 1:
        raise ConfigError("gamma must differ from 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("The ideal-gas entropy needs x > 0 and y > 0")
    value = (np.log(x) + gamma * np.log(y)) / (gamma - 1.0)
    return float(value) if value.ndim == 0 else value


def _domain_events(fixture: Fixture):
    d = fixture.domain
    bounds = (
        lambda s, p: p[0] - d.x_min,
        lambda s, p: d.x_max - p[0],
        lambda s, p: p[1] - d.y_min,
        lambda s, p: d.y_max - p[1],
    )
    for event in bounds:
        event.terminal = True  # type: ignore[attr-defined]
        event.direction = -1  # type: ignore[attr-defined]
    return list(bounds)


def adiabat_ode_trace(
    fixture: Fixture,
    start: Tuple[float, float],
    span: float,
    samples: int = 257,
    clip: bool = False,
) -> np.ndarray:
    """
    Integrate the level curve of the fixture's closed-form entropy through
    ``start`` for an arclength ``span`` (negative spans walk the other way).

    The tangent is (-S_y, S_x) / |grad S| from the exact gradient; DOP853
    with tight tolerances does the stepping.

    Raises:
        ConfigError: the fixture has no closed-form entropy
        DomainError: start outside the domain, or the trace leaves it
            before ``span`` (unless ``clip``, which stops at the boundary)
    """
    if fixture.entropy is None:
        raise ConfigError(f"Fixture {fixture.name} has no closed-form entropy")
    x0, y0 = float(start[0]), float(start[1])
    if not fixture.domain.contains(x0, y0):
        raise DomainError(f"Trace start ({x0!r}, {y0!r}) lies outside the domain")
    if span == 0:
        return np.array([[x0, y0]])

    S_x = fixture.entropy.derivative("x")
    S_y = fixture.entropy.derivative("y")

    def tangent(s: float, p: np.ndarray) -> np.ndarray:
        gx = float(S_x.evaluate(x=p[0], y=p[1]))
        gy = float(S_y.evaluate(x=p[0], y=p[1]))
        norm = np.hypot(gx, gy)
        return np.array([-gy / norm, gx / norm])

    solution = solve_ivp(
        tangent,
        (0.0, float(span)),
        [x0, y0],
        method="DOP853",
        t_eval=np.linspace(0.0, float(span), samples),
        events=_domain_events(fixture),
        rtol=ODE_RTOL,
        atol=ODE_ATOL,
    )
    if solution.status == -1:
        raise DomainError(f"Adiabat trace failed: {solution.message}")

    points = solution.y.T
    if solution.status == 1:
        if not clip:
            raise DomainError(
                f"Adiabat trace from ({x0!r}, {y0!r}) leaves the domain before arclength {span!r}"
            )
        hits = [event for event in solution.y_events if len(event)]
        if hits:
            points = np.vstack([points, hits[0][:1]])
    return points


def level_curve_through(
    fixture: Fixture, start: Tuple[float, float], samples: int = 257
) -> np.ndarray:
    """The whole in-domain adiabat through ``start``, traced both ways to the boundary"""
    d = fixture.domain
    reach = 4.0 * float(np.hypot(d.width, d.height))
    forward = adiabat_ode_trace(fixture, start, reach, samples, clip=True)
    backward = adiabat_ode_trace(fixture, start, -reach, samples, clip=True)
    return np.vstack([backward[::-1], forward[1:]])


def gradient_parallelism(
    field_a: FieldFunction,
    field_b: FieldFunction,
    pts: npt.ArrayLike,
    h: Optional[float] = None,
) -> float:
    """Max over pts of |a x b| / (|a| |b|) for the numerical gradients a, b"""
    h = default_stencil_step() if h is None else float(h)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    x, y = pts[:, 0], pts[:, 1]
    try:
        ax, ay = central_gradient(field_a, x, y, h)
        bx, by = central_gradient(field_b, x, y, h)
    except ReconstructionError as e:
        raise AuditError(f"Gradient stencil failed ({e.step}): {e.message}")

    norms = np.hypot(ax, ay) * np.hypot(bx, by)
    if not np.all(np.isfinite(norms)) or np.any(norms == 0):
        index = int(np.flatnonzero(~np.isfinite(norms) | (norms == 0))[0])
        raise AuditError(f"Degenerate gradient at ({x[index]!r}, {y[index]!r})")
    return float(np.max(np.abs(ax * by - ay * bx) / norms))


def hausdorff(a: npt.ArrayLike, b: npt.ArrayLike) -> float:
    """Symmetric Hausdorff distance between two point sets"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0]))


def closest_polyline(
    polylines: Sequence[np.ndarray], point: Tuple[float, float]
) -> Optional[np.ndarray]:
    """The polyline passing nearest to ``point``"""
    best, best_distance = None, np.inf
    query = np.array([point], dtype=float)
    for polyline in polylines:
        distance = float(cdist(query, np.asarray(polyline, dtype=float)).min())
        if distance < best_distance:
            best, best_distance = polyline, distance
    return best


def oracle_field(fixture: Fixture) -> FieldFunction:
    if fixture.entropy is None:
        raise ConfigError(f"Fixture {fixture.name} has no closed-form entropy")
    entropy = fixture.entropy
    return lambda x, y: entropy.evaluate(x=x, y=y)
