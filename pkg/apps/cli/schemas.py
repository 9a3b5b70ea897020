from typing import Any, Dict, List, Optional, Tuple

from ninja import Schema
from pydantic import Field

from apps.calibrated.services import default_curve_samples
from apps.transform.constants import (
    default_quad_max_depth,
    default_quad_tol,
    default_root_tol,
    default_scan_grid,
)

from .constants import default_audit_points, default_audit_tol, default_grid


class FunctionSchema(Schema):
    """A named one-argument function of t usable inside expressions"""

    expression: str
    derivative: Optional[str] = None
    monotone: bool = False


class DomainSchema(Schema):
    x_min: float
    x_max: float
    y_min: float
    y_max: float


class CurveSchema(Schema):
    """One adiabat: implicit g(x, y) = 0, explicit y = h(x), or a point list"""

    kind: str
    expression: Optional[str] = None
    x_range: Optional[Tuple[float, float]] = None
    points: Optional[List[Tuple[float, float]]] = None
    label: str = ""


class TolerancesSchema(Schema):
    root: float = Field(default_factory=default_root_tol)
    quad: float = Field(default_factory=default_quad_tol)
    quad_max_depth: int = Field(default_factory=default_quad_max_depth)
    scan_grid: int = Field(default_factory=default_scan_grid)
    audit: float = Field(default_factory=default_audit_tol)
    audit_points: int = Field(default_factory=default_audit_points)


class OracleSchema(Schema):
    """Closed-form entropy used by audits and tests"""

    entropy: str
    tolerance: float = 1e-5


class ModelConfig(Schema):
    name: str = ""
    f: str
    functions: Dict[str, FunctionSchema] = Field(default_factory=dict)
    domain: DomainSchema
    orientation: str = "y-solve"
    Y_ref: Optional[float] = None
    mode: str = "calibrated"
    adiabats: List[CurveSchema]
    tolerances: TolerancesSchema = Field(default_factory=TolerancesSchema)
    samples: int = Field(default_factory=default_curve_samples)
    grid: Tuple[int, int] = Field(default_factory=default_grid)
    levels: List[float] = Field(default_factory=lambda: [0.0])
    oracle: Optional[OracleSchema] = None

    class Config:
        json_schema_extra = {
            "example": {
                "name": "ideal_gas",
                "f": "x*y",
                "domain": {"x_min": 0.5, "x_max": 2, "y_min": 0.5, "y_max": 2},
                "orientation": "y-solve",
                "mode": "calibrated",
                "adiabats": [{"kind": "explicit", "expression": "x^(-0.6)"}],
                "levels": [-0.5, 0, 0.5],
            }
        }


class ErrorSchema(Schema):
    detail: str
    step: str


class ReportSchema(Schema):
    """Report document returned by the HTTP surface"""

    mode: str
    config: Dict[str, Any]
    results: Dict[str, Any]


class CheckRowSchema(Schema):
    invariant: str
    measured: Optional[float] = None
    tolerance: Optional[float] = None
    status: str


class CheckSchema(Schema):
    passed: bool
    rows: List[CheckRowSchema]
