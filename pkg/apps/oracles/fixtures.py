import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from django.conf import settings

from apps.calibrated.curves import CurveSpec
from apps.cli.loaders import Model, load_config, prepare
from apps.core.exceptions import ConfigError
from apps.expr.nodes import Expression
from apps.transform.context import Domain, TransformContext

logger = logging.getLogger(__name__)

IDEAL_GAS = "ideal_gas"
SQUARED_CALIBRATION = "squared_calibration"
PHI_GAS = "phi_gas"
VARIABLE_GAMMA = "variable_gamma"
BROKEN_SQUARED = "broken_squared"

SHIPPED = (IDEAL_GAS, SQUARED_CALIBRATION, PHI_GAS, VARIABLE_GAMMA, BROKEN_SQUARED)


@dataclass(frozen=True, eq=False)
class Fixture:
    """A shipped model config together with its closed-form entropy, if any"""

    name: str
    path: Path
    model: Model

    @property
    def f(self) -> Expression:
        return self.model.f

    @property
    def adiabats(self) -> List[CurveSpec]:
        return self.model.curves

    @property
    def entropy(self) -> Optional[Expression]:
        return self.model.oracle

    @property
    def tolerance(self) -> float:
        oracle = self.model.config.oracle
        return oracle.tolerance if oracle else self.model.config.tolerances.audit

    @property
    def domain(self) -> Domain:
        return Domain.coerce(self.model.config.domain.model_dump())

    def context(self) -> TransformContext:
        return self.model.context()


def fixture_path(name: str) -> Path:
    return Path(settings.ADIABAT_FIXTURE_DIR) / f"{name}.json"


def load_fixture(name: str) -> Fixture:
    """Load fixtures/<name>.json"""
    path = fixture_path(name)
    if not path.exists():
        raise ConfigError(f"Unknown fixture '{name}'; shipped fixtures are {list(SHIPPED)}")
    model = prepare(load_config(path))
    logger.debug(f"Loaded fixture {name}")
    return Fixture(name=name, path=path, model=model)
