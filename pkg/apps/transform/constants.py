from django.conf import settings
from django.db import models

# samples along each domain edge used to locate where an isotherm leaves the domain
SPAN_SAMPLES = 129

# relative slack when testing that a point lies in the closed domain rectangle
DOMAIN_SLACK = 1e-12

# fraction of the solved range a level-set bracket reaches past the domain edge
EDGE_PAD = 1e-6

# free-coordinate bracket padding, in units of the root tolerance
EDGE_PAD_STEPS = 8


class Orientation(models.TextChoices):
    Y_SOLVE = "y-solve", "Eliminate y (Y = x, integrate -1/f_y)"
    X_SOLVE = "x-solve", "Eliminate x (Y = y, integrate -1/f_x)"


def default_root_tol() -> float:
    return settings.ADIABAT_ROOT_TOL


def default_quad_tol() -> float:
    return settings.ADIABAT_QUAD_TOL


def default_quad_max_depth() -> int:
    return settings.ADIABAT_QUAD_MAX_DEPTH


def default_scan_grid() -> int:
    return settings.ADIABAT_SCAN_GRID


def default_root_maxiter() -> int:
    return settings.ADIABAT_ROOT_MAXITER


def validate_tolerance(name: str, value: float) -> None:
    """Validate a solver or quadrature tolerance"""
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    if value >= 1e-2:
        raise ValueError(f"{name} must be below 1e-2, got {value!r}")


def validate_scan_grid(value: int) -> None:
    if value < 3:
        raise ValueError(f"scan grid must have at least 3 points per axis, got {value}")
