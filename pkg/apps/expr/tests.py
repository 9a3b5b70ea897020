import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import (
    ConfigError,
    ExpressionDomainError,
    ExpressionSyntaxError,
    NonDifferentiableError,
    UnknownIdentifierError,
)
from apps.expr.functions import FunctionRegistry, ScalarFunction1D
from apps.expr.nodes import Number
from apps.expr.services import ExpressionService, differentiate, parse, to_text


def phi_registry() -> FunctionRegistry:
    registry = FunctionRegistry()
    registry.register("phi", "t + t^2/2", derivative="1 + t", monotone=True)
    return registry


class ParseTests(SimpleTestCase):
    def test_product_of_variables(self):
        self.assertEqual(ExpressionService.eval(parse("x*y"), 2, 3), 6.0)
        self.assertEqual(ExpressionService.eval(parse("x*y"), 0, 5), 0.0)

    def test_negative_exponent(self):
        self.assertAlmostEqual(ExpressionService.eval(parse("x^(-0.6)"), 4, 0), 0.43528, delta=1e-5)

    def test_logarithm_of_one(self):
        self.assertEqual(ExpressionService.eval(parse("ln(x*y^2)"), 1, 1), 0.0)

    def test_precedence(self):
        self.assertEqual(float(parse("-x^2").evaluate(x=3)), -9.0)
        self.assertEqual(float(parse("2^3^2").evaluate()), 512.0)
        self.assertEqual(float(parse("1 + 2*3 - 4/2").evaluate()), 5.0)

    def test_literal_folding(self):
        self.assertEqual(parse("2^-1"), Number(0.5))
        self.assertEqual(parse("5/3"), Number(5.0 / 3.0))

    def test_variable_t(self):
        self.assertEqual(float(parse("t^2").evaluate(t=3)), 9.0)

    def test_vectorised_evaluation(self):
        values = parse("x*y").evaluate(x=np.array([1.0, 2.0]), y=3.0)
        np.testing.assert_array_equal(values, [3.0, 6.0])


class SyntaxErrorTests(SimpleTestCase):
    def test_dangling_operator(self):
        with self.assertRaises(ExpressionSyntaxError) as caught:
            parse("x*")
        self.assertEqual(caught.exception.offset, 2)

    def test_unclosed_parenthesis(self):
        with self.assertRaises(ExpressionSyntaxError) as caught:
            parse("(x")
        self.assertEqual(caught.exception.offset, 2)

    def test_empty_text(self):
        with self.assertRaises(ExpressionSyntaxError) as caught:
            parse("   ")
        self.assertEqual(caught.exception.offset, 3)

    def test_juxtaposition(self):
        with self.assertRaises(ExpressionSyntaxError) as caught:
            parse("x y")
        self.assertEqual(caught.exception.offset, 2)

    def test_bad_character(self):
        with self.assertRaises(ExpressionSyntaxError) as caught:
            parse("x % y")
        self.assertEqual(caught.exception.offset, 2)

    def test_unknown_function(self):
        with self.assertRaises(UnknownIdentifierError) as caught:
            parse("x + foo(x)")
        self.assertEqual(caught.exception.name, "foo")
        self.assertEqual(caught.exception.offset, 4)
        self.assertEqual(caught.exception.exit_code, 1)

    def test_variable_called_like_function(self):
        with self.assertRaises(ExpressionSyntaxError):
            parse("x(2)")


class EvaluationTests(SimpleTestCase):
    def test_log_of_negative(self):
        with self.assertRaises(ExpressionDomainError):
            ExpressionService.eval(parse("ln(x)"), -1, 0)

    def test_division_by_zero(self):
        with self.assertRaises(ExpressionDomainError):
            ExpressionService.eval(parse("x/y"), 1, 0)

    def test_fractional_power_of_negative_base(self):
        with self.assertRaises(ExpressionDomainError):
            ExpressionService.eval(parse("y^(5/3)"), 1, -2)

    def test_integer_power_of_negative_base(self):
        self.assertEqual(ExpressionService.eval(parse("y^2"), 1, -2), 4.0)

    def test_unbound_variable(self):
        with self.assertRaises(ConfigError):
            parse("t*x").evaluate(x=1.0)


class DifferentiateTests(SimpleTestCase):
    def test_ideal_gas_partial(self):
        f_y = differentiate(parse("x*y"), "y")
        self.assertEqual(ExpressionService.eval(f_y, 2, 3), 2.0)

    def test_squared_partial(self):
        f_y = differentiate(parse("x^2*y^2"), "y")
        self.assertEqual(ExpressionService.eval(f_y, 1, 2), 4.0)

    def test_unknown_variable(self):
        with self.assertRaises(ConfigError):
            differentiate(parse("x*y"), "z")

    def test_constant_derivative_folds_to_zero(self):
        self.assertEqual(differentiate(parse("x^2 + 1"), "y"), Number(0.0))

    @settings(max_examples=60, deadline=None)
    @given(
        st.sampled_from(
            [
                "x^2*y^2",
                "ln(x*y^2)",
                "x*y^(5/3)",
                "exp(x)/y",
                "sqrt(x + y)",
                "x^y",
                "-x^3 + 2*x*y - y/x",
            ]
        ),
        st.floats(min_value=0.5, max_value=2.0),
        st.floats(min_value=0.5, max_value=2.0),
    )
    def test_matches_central_difference(self, text, x, y):
        """Symbolic partials agree with a central difference"""
        e = parse(text)
        h = 1e-6
        dx = (e.evaluate(x=x + h, y=y) - e.evaluate(x=x - h, y=y)) / (2 * h)
        dy = (e.evaluate(x=x, y=y + h) - e.evaluate(x=x, y=y - h)) / (2 * h)
        self.assertAlmostEqual(float(differentiate(e, "x").evaluate(x=x, y=y)), float(dx), delta=1e-5)
        self.assertAlmostEqual(float(differentiate(e, "y").evaluate(x=x, y=y)), float(dy), delta=1e-5)


_LEAVES = st.sampled_from(["x", "y", "t", "2", "0.5", "3", "1e-3"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*", "/", "^"]), children).map(
        lambda parts: f"({parts[0]} {parts[1]} {parts[2]})"
    )
    unary = st.tuples(st.sampled_from(["-", "ln", "exp", "sqrt"]), children).map(
        lambda parts: f"-{parts[1]}" if parts[0] == "-" else f"{parts[0]}({parts[1]})"
    )
    return binary | unary


class PrintTests(SimpleTestCase):
    def test_negative_literal_is_parenthesised(self):
        self.assertEqual(to_text(parse("x^(-0.6)")), "(x ^ (-0.6))")

    def test_function_call_text(self):
        self.assertEqual(to_text(parse("phi(x*y)", phi_registry())), "phi((x * y))")

    @settings(max_examples=200, deadline=None)
    @given(st.recursive(_LEAVES, _combine, max_leaves=12))
    def test_printed_text_parses_back(self, text):
        """Printing then parsing gives the same tree"""
        e = parse(text)
        again = parse(to_text(e))
        self.assertEqual(again, e)
        self.assertEqual(to_text(again), to_text(e))


class FunctionRegistryTests(SimpleTestCase):
    def test_registered_function_evaluates(self):
        f = parse("phi(x*y)", phi_registry())
        self.assertEqual(ExpressionService.eval(f, 1, 1), 1.5)

    def test_chain_rule_uses_registered_derivative(self):
        f = parse("phi(x*y)", phi_registry())
        # phi'(1) * y at (1, 1)
        self.assertEqual(ExpressionService.eval(differentiate(f, "x"), 1, 1), 2.0)

    def test_reserved_names(self):
        registry = FunctionRegistry()
        for name in ("ln", "exp", "sqrt", "x", "y", "t"):
            with self.assertRaises(ConfigError):
                registry.register(name, "t")

    def test_duplicate_name(self):
        registry = phi_registry()
        with self.assertRaises(ConfigError):
            registry.register("phi", "t")

    def test_function_body_must_use_t(self):
        with self.assertRaises(ConfigError):
            FunctionRegistry().register("g", "x + t")

    def test_numerical_inverse(self):
        phi = phi_registry().get("phi")
        self.assertAlmostEqual(float(phi.inverse(1.5, (0.0, 10.0))), 1.0, places=10)

    def test_inverse_derivative(self):
        phi_inv = phi_registry().get("phi").inverse_function((0.0, 10.0))
        # 1 / phi'(phi^-1(1.5)) = 1 / 2
        self.assertAlmostEqual(float(phi_inv.derivative().evaluate(t=1.5)), 0.5, places=9)

    def test_inverse_needs_monotone(self):
        registry = FunctionRegistry()
        g = registry.register("g", "t^2")
        with self.assertRaises(ConfigError):
            g.inverse(4.0, (0.0, 3.0))

    def test_monotone_check(self):
        phi = phi_registry().get("phi")
        self.assertTrue(phi.is_monotone_on(0.0, 5.0))
        self.assertFalse(FunctionRegistry().register("g", "t^2").is_monotone_on(-1.0, 1.0))

    def test_implementation_without_derivative(self):
        registry = FunctionRegistry()
        registry.add(ScalarFunction1D(name="g", implementation=np.tanh))
        e = parse("g(x)", registry)
        self.assertAlmostEqual(float(e.evaluate(x=0.5)), np.tanh(0.5))
        with self.assertRaises(NonDifferentiableError):
            differentiate(e, "x")
