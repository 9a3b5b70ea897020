import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import (
    ConfigError,
    ExpressionSyntaxError,
    InversionError,
    OutOfRangeError,
    QuadratureError,
    SignScanError,
)
from apps.core.numerics import adaptive_simpson, central_gradient, find_bracketed_root


class ExceptionTests(SimpleTestCase):
    def test_config_errors_exit_with_one(self):
        self.assertEqual(ConfigError("bad").exit_code, 1)
        self.assertEqual(ExpressionSyntaxError("Unexpected ')'", 3).exit_code, 1)

    def test_numerical_errors_exit_with_two(self):
        self.assertEqual(InversionError("no bracket").exit_code, 2)
        self.assertEqual(QuadratureError("depth").exit_code, 2)

    def test_syntax_error_reports_offset(self):
        error = ExpressionSyntaxError("Unexpected ')'", 4)
        self.assertEqual(error.offset, 4)
        self.assertIn("offset 4", error.message)
        self.assertEqual(error.step, "parse")

    def test_out_of_range_names_band(self):
        error = OutOfRangeError("F evaluated at 9.0", (1.0, 2.0))
        self.assertEqual(error.valid_range, (1.0, 2.0))
        self.assertIn("[1.0, 2.0]", error.message)

    def test_sign_scan_appends_suggestion(self):
        error = SignScanError("f_y vanishes", subregion=(0, 1, 0, 1), suggestion="restrict the domain")
        self.assertTrue(error.message.endswith("restrict the domain"))
        self.assertEqual(error.subregion, (0, 1, 0, 1))


class RootFinderTests(SimpleTestCase):
    def test_square_root_of_two(self):
        root = find_bracketed_root(lambda z: z * z - 2.0, 0.0, 2.0, xtol=1e-14)
        self.assertAlmostEqual(float(root), np.sqrt(2.0), places=12)

    def test_vectorised_targets(self):
        targets = np.array([0.5, 1.0, 3.0, 7.5])
        roots = find_bracketed_root(lambda z, c: z**3 - c, 0.0, 3.0, args=(targets,))
        np.testing.assert_allclose(roots, np.cbrt(targets), rtol=1e-11)

    def test_missing_bracket_raises(self):
        with self.assertRaises(InversionError):
            find_bracketed_root(lambda z: z * z + 1.0, -1.0, 1.0)

    def test_missing_bracket_can_be_masked(self):
        roots = find_bracketed_root(
            lambda z, c: z - c, 0.0, 1.0, args=(np.array([0.25, 4.0]),), allow_missing=True
        )
        self.assertAlmostEqual(float(roots[0]), 0.25, places=12)
        self.assertTrue(np.isnan(roots[1]))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(min_value=0.01, max_value=100.0))
    def test_logarithm_inverse(self, value):
        """exp(root) recovers any target in the bracketed range"""
        root = find_bracketed_root(lambda z, c: np.exp(z) - c, -10.0, 10.0, args=(value,))
        self.assertAlmostEqual(float(root), np.log(value), delta=1e-10)


class AdaptiveSimpsonTests(SimpleTestCase):
    def test_sine_over_half_period(self):
        value = adaptive_simpson(np.sin, 0.0, np.pi, tol=1e-12)
        self.assertAlmostEqual(float(value), 2.0, places=10)

    def test_many_intervals_at_once(self):
        upper = np.array([0.0, 0.5, 1.0, 2.0])
        values = adaptive_simpson(np.exp, 0.0, upper, tol=1e-12)
        np.testing.assert_allclose(values, np.expm1(upper), rtol=1e-10, atol=1e-14)

    def test_reversed_limits_flip_sign(self):
        forward = adaptive_simpson(lambda z: 1.0 / z, 1.0, 2.0)
        backward = adaptive_simpson(lambda z: 1.0 / z, 2.0, 1.0)
        self.assertAlmostEqual(float(forward), np.log(2.0), places=9)
        self.assertAlmostEqual(float(backward), -np.log(2.0), places=9)

    def test_parameters_follow_their_intervals(self):
        scale = np.array([1.0, 2.0, -3.0])
        values = adaptive_simpson(lambda z, c: c * z * z, 0.0, 1.0, args=(scale,))
        np.testing.assert_allclose(values, scale / 3.0, rtol=1e-12)

    def test_non_finite_integrand_raises(self):
        with np.errstate(divide="ignore"):
            with self.assertRaises(QuadratureError):
                adaptive_simpson(lambda z: 1.0 / z, -1.0, 1.0)

    def test_depth_limit_raises(self):
        with self.assertRaises(QuadratureError):
            adaptive_simpson(np.sqrt, 0.0, 1.0, tol=1e-14, max_depth=3)

    def test_empty_problem(self):
        self.assertEqual(adaptive_simpson(np.sin, np.array([]), np.array([])).shape, (0,))


class CentralGradientTests(SimpleTestCase):
    def test_polynomial_gradient(self):
        gx, gy = central_gradient(lambda x, y: x * x * y, [1.0, 2.0], [2.0, 3.0], h=1e-4)
        np.testing.assert_allclose(gx, [4.0, 12.0], rtol=1e-8)
        np.testing.assert_allclose(gy, [1.0, 4.0], rtol=1e-8)

    def test_anisotropic_steps(self):
        gx, gy = central_gradient(lambda x, y: x + 10.0 * y, 0.0, 0.0, h=1e-3, scale=(1.0, 10.0))
        self.assertAlmostEqual(float(gx[0]), 1.0, places=9)
        self.assertAlmostEqual(float(gy[0]), 10.0, places=9)
