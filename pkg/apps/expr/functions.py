import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, Iterator, Optional, Tuple, Union

import numpy as np
import numpy.typing as npt

from apps.core.exceptions import ConfigError, NonDifferentiableError
from apps.core.numerics import find_bracketed_root

from .nodes import BUILTINS, ONE, VARIABLES, Expression, FunctionCall, Variable, div

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScalarFunction1D:
    """
    A named function of one variable t, e.g. a calibration phi or an
    adiabatic index gamma.

    Exactly one of ``expression``, ``implementation`` or ``inverse_of``
    defines the values. Inverses are always numerical.
    """

    name: str
    expression: Optional[Expression] = None
    derivative_expression: Optional[Expression] = None
    monotone: bool = False
    inverse_tol: float = 1e-12
    implementation: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse_of: Optional["ScalarFunction1D"] = None
    bracket: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        sources = [self.expression, self.implementation, self.inverse_of]
        if sum(source is not None for source in sources) != 1:
            raise ConfigError(f"Function '{self.name}' needs exactly one definition")
        for expr in (self.expression, self.derivative_expression):
            if expr is not None and not expr.variables() <= {"t"}:
                raise ConfigError(
                    f"Function '{self.name}' may only use the variable t, "
                    f"got {sorted(expr.variables())}"
                )

    def apply(self, values: npt.ArrayLike) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if self.expression is not None:
            return self.expression.evaluate(t=values)
        if self.inverse_of is not None:
            return self.inverse_of.inverse(values, self.bracket)
        return np.asarray(self.implementation(values), dtype=float)

    def __call__(self, values: npt.ArrayLike) -> np.ndarray:
        return self.apply(values)

    @property
    def differentiable(self) -> bool:
        return self.implementation is None or self.derivative_expression is not None

    @cached_property
    def _derivative(self) -> Expression:
        if self.derivative_expression is not None:
            return self.derivative_expression
        if self.expression is not None:
            return self.expression.derivative("t")
        if self.inverse_of is not None:
            # (g^-1)'(t) = 1 / g'(g^-1(t))
            inner = FunctionCall(self, Variable("t"))
            return div(ONE, self.inverse_of.derivative().substitute("t", inner))
        raise NonDifferentiableError(f"Function '{self.name}' has no derivative")

    def derivative(self) -> Expression:
        """Derivative as an expression in t"""
        return self._derivative

    def inverse(
        self, values: npt.ArrayLike, bracket: Optional[Tuple[float, float]] = None
    ) -> np.ndarray:
        """Numerical inverse on a bracket of the argument"""
        if not self.monotone:
            raise ConfigError(f"Function '{self.name}' is not declared monotone")
        bracket = bracket or self.bracket
        if bracket is None:
            raise ConfigError(f"Inverting '{self.name}' needs an argument bracket")
        values = np.asarray(values, dtype=float)
        return find_bracketed_root(
            lambda t, v: self.apply(t) - v,
            bracket[0],
            bracket[1],
            args=(values,),
            xtol=self.inverse_tol,
            what=f"{self.name}^-1",
        )

    def inverse_function(self, bracket: Tuple[float, float]) -> "ScalarFunction1D":
        return ScalarFunction1D(
            name=f"{self.name}_inv",
            monotone=True,
            inverse_tol=self.inverse_tol,
            inverse_of=self,
            bracket=bracket,
        )

    def is_monotone_on(self, lo: float, hi: float, samples: int = 257) -> bool:
        values = self.apply(np.linspace(lo, hi, samples))
        steps = np.diff(values)
        return bool(np.all(steps > 0) or np.all(steps < 0))


@dataclass
class FunctionRegistry:
    """Named single-variable functions visible to the parser"""

    _functions: Dict[str, ScalarFunction1D] = field(default_factory=dict)

    def register(
        self,
        name: str,
        expression: Union[str, Expression],
        derivative: Union[str, Expression, None] = None,
        monotone: bool = False,
        inverse_tol: float = 1e-12,
    ) -> ScalarFunction1D:
        from .parser import parse

        if isinstance(expression, str):
            expression = parse(expression, self)
        if isinstance(derivative, str):
            derivative = parse(derivative, self)
        return self.add(
            ScalarFunction1D(
                name=name,
                expression=expression,
                derivative_expression=derivative,
                monotone=monotone,
                inverse_tol=inverse_tol,
            )
        )

    def add(self, function: ScalarFunction1D) -> ScalarFunction1D:
        name = function.name
        if name in BUILTINS or name in VARIABLES:
            raise ConfigError(f"'{name}' is reserved and cannot be registered")
        if not name.isidentifier():
            raise ConfigError(f"'{name}' is not a valid function name")
        if name in self._functions:
            raise ConfigError(f"Function '{name}' is already registered")
        self._functions[name] = function
        logger.debug(f"Registered function {name}")
        return function

    def get(self, name: str) -> Optional[ScalarFunction1D]:
        return self._functions.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._functions

    def __iter__(self) -> Iterator[ScalarFunction1D]:
        return iter(self._functions.values())

    def __len__(self) -> int:
        return len(self._functions)
