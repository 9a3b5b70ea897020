import logging
from typing import Optional

import numpy as np

from apps.core.exceptions import ConfigError, ExpressionDomainError

from .functions import FunctionRegistry
from .nodes import VARIABLES, Expression
from .parser import parse as parse_expression

logger = logging.getLogger(__name__)


class ExpressionService:
    """Parse, evaluate, print and differentiate expressions"""

    @staticmethod
    def parse(text: str, functions: Optional[FunctionRegistry] = None) -> Expression:
        return parse_expression(text, functions)

    @staticmethod
    def eval(e: Expression, x: float, y: float) -> float:
        """Evaluate at a single point; non-finite results raise"""
        value = float(e.evaluate(x=x, y=y, t=None))
        if not np.isfinite(value):
            raise ExpressionDomainError(f"Non-finite value of {e.to_text()} at ({x!r}, {y!r})")
        return value

    @staticmethod
    def differentiate(e: Expression, var: str) -> Expression:
        if var not in VARIABLES:
            raise ConfigError(f"Cannot differentiate with respect to '{var}'")
        return e.derivative(var)

    @staticmethod
    def to_text(e: Expression) -> str:
        return e.to_text()

    @staticmethod
    def substitute(e: Expression, var: str, replacement: Expression) -> Expression:
        return e.substitute(var, replacement)


parse = ExpressionService.parse
differentiate = ExpressionService.differentiate
to_text = ExpressionService.to_text
