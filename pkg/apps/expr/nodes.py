"""
Expression tree for equations of state, calibration functions and adiabats.

Nodes are immutable. ``evaluate`` works on numpy arrays (scalars are the 0-d
case) and raises ExpressionDomainError instead of returning non-finite
values. ``derivative`` returns another Expression, built through the folding
constructors at the bottom of this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

from apps.core.exceptions import (
    ConfigError,
    ExpressionDomainError,
    NonDifferentiableError,
)

if TYPE_CHECKING:
    from .functions import ScalarFunction1D

VARIABLES = ("x", "y", "t")
BUILTINS = ("ln", "exp", "sqrt")

Env = Mapping[str, np.ndarray]


def _checked(node: "Expression", value: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise ExpressionDomainError(f"Non-finite value in {node.to_text()}")
    return value


def _first_bad(values: np.ndarray, bad: np.ndarray) -> float:
    return float(np.broadcast_to(values, bad.shape)[bad].flat[0])


class Expression:
    """Base class of all expression nodes"""

    def evaluate(self, x=None, y=None, t=None) -> np.ndarray:
        """Evaluate on scalars or arrays; the result has the broadcast input shape"""
        env = {
            name: np.asarray(value, dtype=float)
            for name, value in (("x", x), ("y", y), ("t", t))
            if value is not None
        }
        shape = np.broadcast_shapes(*(v.shape for v in env.values())) if env else ()
        with np.errstate(all="ignore"):
            value = self._eval(env)
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    def __call__(self, x=None, y=None, t=None) -> np.ndarray:
        return self.evaluate(x, y, t)

    def _eval(self, env: Env) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, var: str) -> Expression:
        raise NotImplementedError

    def substitute(self, var: str, replacement: Expression) -> Expression:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        raise NotImplementedError

    def depends_on(self, var: str) -> bool:
        return var in self.variables()

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Number(Expression):
    value: float

    def _eval(self, env: Env) -> np.ndarray:
        return np.asarray(self.value)

    def derivative(self, var: str) -> Expression:
        return ZERO

    def substitute(self, var: str, replacement: Expression) -> Expression:
        return self

    def to_text(self) -> str:
        if float(self.value).is_integer() and abs(self.value) < 1e15:
            text = str(int(self.value))
        else:
            text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text

    def variables(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True)
class Variable(Expression):
    name: str

    def _eval(self, env: Env) -> np.ndarray:
        try:
            return env[self.name]
        except KeyError:
            raise ConfigError(f"Variable '{self.name}' is not bound for evaluation")

    def derivative(self, var: str) -> Expression:
        return ONE if var == self.name else ZERO

    def substitute(self, var: str, replacement: Expression) -> Expression:
        return replacement if var == self.name else self

    def to_text(self) -> str:
        return self.name

    def variables(self) -> frozenset[str]:
        return frozenset({self.name})


@dataclass(frozen=True)
class BinaryOp(Expression):
    op: str
    left: Expression
    right: Expression

    def _eval(self, env: Env) -> np.ndarray:
        a = self.left._eval(env)
        b = self.right._eval(env)
        if self.op == "+":
            value = a + b
        elif self.op == "-":
            value = a - b
        elif self.op == "*":
            value = a * b
        elif self.op == "/":
            zero = np.broadcast_to(b == 0, np.broadcast_shapes(np.shape(a), np.shape(b)))
            if np.any(zero):
                raise ExpressionDomainError(f"Division by zero in {self.to_text()}")
            value = a / b
        else:
            fractional = b != np.round(b)
            bad = np.broadcast_to(
                fractional & (a <= 0), np.broadcast_shapes(np.shape(a), np.shape(b))
            )
            if np.any(bad):
                raise ExpressionDomainError(
                    f"Non-integer power of non-positive base {_first_bad(a, bad)!r} "
                    f"in {self.to_text()}"
                )
            value = np.power(a, b)
        return _checked(self, value)

    def derivative(self, var: str) -> Expression:
        u, v = self.left, self.right
        if self.op == "+":
            return add(u.derivative(var), v.derivative(var))
        if self.op == "-":
            return sub(u.derivative(var), v.derivative(var))
        if self.op == "*":
            return add(mul(u.derivative(var), v), mul(u, v.derivative(var)))
        if self.op == "/":
            return div(
                sub(mul(u.derivative(var), v), mul(u, v.derivative(var))),
                power(v, Number(2.0)),
            )
        if not v.depends_on(var):
            # d(u^c) = c u^(c-1) du
            return mul(mul(v, power(u, sub(v, ONE))), u.derivative(var))
        if not u.depends_on(var):
            return mul(mul(self, call_builtin("ln", u)), v.derivative(var))
        return mul(
            self,
            add(
                mul(v.derivative(var), call_builtin("ln", u)),
                div(mul(v, u.derivative(var)), u),
            ),
        )

    def substitute(self, var: str, replacement: Expression) -> Expression:
        return binary(
            self.op,
            self.left.substitute(var, replacement),
            self.right.substitute(var, replacement),
        )

    def to_text(self) -> str:
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"

    def variables(self) -> frozenset[str]:
        return self.left.variables() | self.right.variables()


@dataclass(frozen=True)
class UnaryOp(Expression):
    op: str
    operand: Expression

    def _eval(self, env: Env) -> np.ndarray:
        a = self.operand._eval(env)
        if self.op == "neg":
            return -a
        if self.op == "ln":
            if np.any(a <= 0):
                raise ExpressionDomainError(
                    f"ln of non-positive value {_first_bad(a, a <= 0)!r} in {self.to_text()}"
                )
            return _checked(self, np.log(a))
        if self.op == "sqrt":
            if np.any(a < 0):
                raise ExpressionDomainError(
                    f"sqrt of negative value {_first_bad(a, a < 0)!r} in {self.to_text()}"
                )
            return _checked(self, np.sqrt(a))
        return _checked(self, np.exp(a))

    def derivative(self, var: str) -> Expression:
        u = self.operand
        du = u.derivative(var)
        if self.op == "neg":
            return neg(du)
        if self.op == "ln":
            return div(du, u)
        if self.op == "sqrt":
            return div(du, mul(Number(2.0), self))
        return mul(self, du)

    def substitute(self, var: str, replacement: Expression) -> Expression:
        operand = self.operand.substitute(var, replacement)
        return neg(operand) if self.op == "neg" else call_builtin(self.op, operand)

    def to_text(self) -> str:
        if self.op == "neg":
            return f"(-{self.operand.to_text()})"
        return f"{self.op}({self.operand.to_text()})"

    def variables(self) -> frozenset[str]:
        return self.operand.variables()


@dataclass(frozen=True)
class FunctionCall(Expression):
    """Reference to a registered single-variable function, e.g. phi(x*y)"""

    function: "ScalarFunction1D"
    argument: Expression

    def _eval(self, env: Env) -> np.ndarray:
        return _checked(self, self.function.apply(self.argument._eval(env)))

    def derivative(self, var: str) -> Expression:
        if not self.function.differentiable:
            raise NonDifferentiableError(
                f"Function '{self.function.name}' has no registered derivative"
            )
        outer = self.function.derivative().substitute("t", self.argument)
        return mul(outer, self.argument.derivative(var))

    def substitute(self, var: str, replacement: Expression) -> Expression:
        return FunctionCall(self.function, self.argument.substitute(var, replacement))

    def to_text(self) -> str:
        return f"{self.function.name}({self.argument.to_text()})"

    def variables(self) -> frozenset[str]:
        return self.argument.variables()


ZERO = Number(0.0)
ONE = Number(1.0)


def _is(node: Expression, value: float) -> bool:
    return isinstance(node, Number) and node.value == value


def _fold(node: Expression) -> Expression:
    """Replace an all-literal node by its value when that value is defined"""
    try:
        value = float(node.evaluate())
    except ExpressionDomainError:
        return node
    return Number(value) if math.isfinite(value) else node


def add(a: Expression, b: Expression) -> Expression:
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    node = BinaryOp("+", a, b)
    return _fold(node) if isinstance(a, Number) and isinstance(b, Number) else node


def sub(a: Expression, b: Expression) -> Expression:
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    node = BinaryOp("-", a, b)
    return _fold(node) if isinstance(a, Number) and isinstance(b, Number) else node


def mul(a: Expression, b: Expression) -> Expression:
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    node = BinaryOp("*", a, b)
    return _fold(node) if isinstance(a, Number) and isinstance(b, Number) else node


def div(a: Expression, b: Expression) -> Expression:
    if _is(b, 1.0):
        return a
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    node = BinaryOp("/", a, b)
    return _fold(node) if isinstance(a, Number) and isinstance(b, Number) else node


def power(a: Expression, b: Expression) -> Expression:
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    node = BinaryOp("^", a, b)
    return _fold(node) if isinstance(a, Number) and isinstance(b, Number) else node


def neg(a: Expression) -> Expression:
    if isinstance(a, Number):
        return Number(-a.value)
    if isinstance(a, UnaryOp) and a.op == "neg":
        return a.operand
    return UnaryOp("neg", a)


def call_builtin(name: str, a: Expression) -> Expression:
    node = UnaryOp(name, a)
    return _fold(node) if isinstance(a, Number) else node


def binary(op: str, a: Expression, b: Expression) -> Expression:
    return {"+": add, "-": sub, "*": mul, "/": div, "^": power}[op](a, b)
