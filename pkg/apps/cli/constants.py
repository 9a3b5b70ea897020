import re
from typing import Tuple

from django.conf import settings
from django.db import models

ENTROPY_GRID_FILE = "entropy_grid.csv"
ADIABATS_FILE = "adiabats.json"
REPORT_FILE = "report.json"
RECALIBRATION_FILE = "recalibration.csv"
TEMPERATURE_GRID_FILE = "temperature_grid.csv"
PLOT_FILE = "adiabats.svg"

MIN_GRID = 16

_GRID = re.compile(r"^\s*(\d+)\s*[xX]\s*(\d+)\s*$")


class Mode(models.TextChoices):
    CALIBRATED = "calibrated", "Calibrated (one adiabat)"
    UNCALIBRATED = "uncalibrated", "Uncalibrated (two adiabats)"


ADIABATS_PER_MODE = {Mode.CALIBRATED: 1, Mode.UNCALIBRATED: 2}


def parse_grid(text: str) -> Tuple[int, int]:
    """Parse 'NxM' into (N, M)"""
    match = _GRID.match(text)
    if not match:
        raise ValueError(f"Grid must look like NxM, got {text!r}")
    return int(match.group(1)), int(match.group(2))


def parse_levels(text: str) -> list:
    """Parse 'a,b,c' into floats"""
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"Levels must be a comma-separated list of numbers, got {text!r}")


def default_grid() -> Tuple[int, int]:
    return parse_grid(settings.ADIABAT_GRID)


def default_audit_tol() -> float:
    return settings.ADIABAT_AUDIT_TOL


def default_audit_points() -> int:
    return settings.ADIABAT_AUDIT_POINTS


def validate_grid(grid: Tuple[int, int]) -> None:
    nx, ny = grid
    if nx < MIN_GRID or ny < MIN_GRID:
        raise ValueError(f"Output grid must be at least {MIN_GRID}x{MIN_GRID}, got {nx}x{ny}")


def validate_adiabat_count(mode: str, count: int) -> None:
    """Calibrated mode takes exactly one adiabat, uncalibrated exactly two"""
    expected = ADIABATS_PER_MODE[Mode(mode)]
    if count != expected:
        raise ValueError(f"Mode '{mode}' needs exactly {expected} adiabat(s), got {count}")
