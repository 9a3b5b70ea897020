"""
Reading ModelConfig documents and turning them into library objects.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

from pydantic import ValidationError

from apps.calibrated.curves import CurveKind, CurveSpec
from apps.core.exceptions import ConfigError
from apps.expr.functions import FunctionRegistry
from apps.expr.nodes import Expression
from apps.expr.parser import parse
from apps.transform.constants import Orientation, validate_scan_grid, validate_tolerance
from apps.transform.context import Domain, TransformContext

from .constants import Mode, validate_adiabat_count, validate_grid
from .schemas import CurveSchema, ModelConfig

logger = logging.getLogger(__name__)


def _describe_validation(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        problems.append(f"{location}: {item['msg']}")
    return "; ".join(problems)


def parse_config(data: Mapping[str, Any]) -> ModelConfig:
    """Validate a decoded config document"""
    try:
        config = ModelConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid model config: {_describe_validation(e)}")
    validate_config(config)
    return config


def load_config(path: Union[str, Path]) -> ModelConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e.strerror or e}")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e.msg} at line {e.lineno}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must be a JSON object")
    config = parse_config(data)
    logger.info(f"Loaded config {path} (mode={config.mode}, f={config.f})")
    return config


def validate_config(config: ModelConfig) -> None:
    """Cross-field checks; every failure is a ConfigError"""
    try:
        if config.mode not in Mode.values:
            raise ValueError(f"Unknown mode {config.mode!r}; use one of {list(Mode.values)}")
        if config.orientation not in Orientation.values:
            raise ValueError(
                f"Unknown orientation {config.orientation!r}; use one of {list(Orientation.values)}"
            )
        validate_adiabat_count(config.mode, len(config.adiabats))
        validate_grid(config.grid)
        validate_tolerance("tolerances.root", config.tolerances.root)
        validate_tolerance("tolerances.quad", config.tolerances.quad)
        validate_scan_grid(config.tolerances.scan_grid)
        if config.tolerances.quad_max_depth < 1:
            raise ValueError("tolerances.quad_max_depth must be at least 1")
        if config.tolerances.audit < 0:
            raise ValueError("tolerances.audit must not be negative")
        if config.tolerances.audit_points < 1:
            raise ValueError("tolerances.audit_points must be at least 1")
        if config.samples < 4:
            raise ValueError(f"samples must be at least 4, got {config.samples}")
        for curve in config.adiabats:
            _validate_curve(curve)
    except ValueError as e:
        raise ConfigError(str(e))
    Domain.coerce(config.domain.model_dump())


def _validate_curve(curve: CurveSchema) -> None:
    if curve.kind not in CurveKind.values:
        raise ValueError(f"Unknown curve kind {curve.kind!r}; use one of {list(CurveKind.values)}")
    if curve.kind == CurveKind.POINTS:
        if not curve.points:
            raise ValueError("A points curve needs a 'points' list")
    elif not curve.expression:
        raise ValueError(f"An {curve.kind} curve needs an 'expression'")


def apply_overrides(
    config: ModelConfig,
    tol: Optional[float] = None,
    grid: Optional[Tuple[int, int]] = None,
    levels: Optional[Sequence[float]] = None,
    audit: bool = False,
) -> ModelConfig:
    """
    Command-line flags win over the file. ``tol`` is the audit tolerance for
    the audit command and the root tolerance otherwise.
    """
    update: dict = {}
    if tol is not None:
        field = "audit" if audit else "root"
        update["tolerances"] = config.tolerances.model_copy(update={field: float(tol)})
    if grid is not None:
        update["grid"] = tuple(grid)
    if levels is not None:
        update["levels"] = [float(level) for level in levels]
    if not update:
        return config
    config = config.model_copy(update=update)
    validate_config(config)
    return config


def build_registry(config: ModelConfig) -> FunctionRegistry:
    registry = FunctionRegistry()
    for name, spec in config.functions.items():
        registry.register(
            name,
            spec.expression,
            derivative=spec.derivative,
            monotone=spec.monotone,
        )
    return registry


def build_curve(curve: CurveSchema, registry: FunctionRegistry) -> CurveSpec:
    if curve.kind == CurveKind.POINTS:
        return CurveSpec.from_points(curve.points or [], label=curve.label)
    expression = parse(curve.expression or "", registry)
    if curve.kind == CurveKind.EXPLICIT:
        return CurveSpec.explicit(expression, x_range=curve.x_range, label=curve.label)
    return CurveSpec.implicit(expression, label=curve.label)


@dataclass(frozen=True, eq=False)
class Model:
    """A validated config with its expressions parsed"""

    config: ModelConfig
    functions: FunctionRegistry
    f: Expression
    curves: List[CurveSpec]
    oracle: Optional[Expression] = None

    @property
    def grid(self) -> Tuple[int, int]:
        return self.config.grid

    def context(self) -> TransformContext:
        """Build the transform context; raises SignScanError on a bad domain"""
        tolerances = self.config.tolerances
        return TransformContext.build(
            self.f,
            self.config.domain.model_dump(),
            orientation=self.config.orientation,
            Y_ref=self.config.Y_ref,
            root_tol=tolerances.root,
            quad_tol=tolerances.quad,
            quad_max_depth=tolerances.quad_max_depth,
            scan_grid=tolerances.scan_grid,
            functions=self.functions,
        )


def prepare(config: ModelConfig) -> Model:
    """Parse every expression in the config; errors are ConfigErrors"""
    registry = build_registry(config)
    f = parse(config.f, registry)
    curves = [build_curve(curve, registry) for curve in config.adiabats]
    oracle = parse(config.oracle.entropy, registry) if config.oracle else None
    return Model(config=config, functions=registry, f=f, curves=curves, oracle=oracle)


def effective_config(config: ModelConfig) -> dict:
    """The config with every default materialised, as written to report.json"""
    return json.loads(config.model_dump_json())
