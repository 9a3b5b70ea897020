import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.calibrated.curves import CurveSpec
from apps.calibrated.services import CalibratedService
from apps.core.exceptions import (
    ConfigError,
    CrossingAdiabatsError,
    EmptyOverlapError,
    OutOfRangeError,
)
from apps.expr.services import parse
from apps.transform.context import TransformContext
from apps.uncalibrated.services import (
    UncalibratedService,
    fit_power_law,
    normalized_entropy_at,
    recalibrated_temperature_at,
    reconstruct_uncalibrated,
)

WIDE = (0.25, 4.0, 0.25, 4.0)


def first_adiabat() -> CurveSpec:
    return CurveSpec.implicit(parse("x*y^(5/3) - 1"))


def second_adiabat() -> CurveSpec:
    return CurveSpec.implicit(parse("x*y^(5/3) - exp(1)"))


def on_overlap(res, points: np.ndarray) -> np.ndarray:
    X_t = res.ctx.f.evaluate(x=points[:, 0], y=points[:, 1])
    return points[res.contains(X_t)]


class SquaredCalibrationTests(SimpleTestCase):
    """f = x^2 y^2 is a miscalibrated ideal gas; the recalibration recovers x*y"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = TransformContext.build("x^2*y^2", WIDE, Y_ref=1.0)
        cls.res = reconstruct_uncalibrated(cls.ctx, first_adiabat(), second_adiabat(), 257)

    def test_overlap(self):
        lo, hi = self.res.overlap
        self.assertEqual((lo, hi), self.res.valid_range)
        self.assertAlmostEqual(lo, np.exp(1.2) * (np.e / 4.0 ** (5.0 / 3.0)) ** 0.8, delta=1e-6)
        self.assertAlmostEqual(hi, 4.0**0.8, delta=1e-6)

    def test_normalized_entropy_on_the_adiabats(self):
        a0 = on_overlap(self.res, self.res.adiabats[0])
        a1 = on_overlap(self.res, self.res.adiabats[1])
        self.assertGreater(len(a0), 20)
        self.assertGreater(len(a1), 20)
        np.testing.assert_allclose(self.res.evaluate_many(a0[:, 0], a0[:, 1]), 0.0, atol=1e-9)
        np.testing.assert_allclose(self.res.evaluate_many(a1[:, 0], a1[:, 1]), 1.0, atol=1e-9)

    def test_gap_is_inverse_square_root(self):
        law = fit_power_law(self.res)
        self.assertAlmostEqual(law.exponent, -0.5, delta=1e-3)
        self.assertAlmostEqual(law.coefficient, 0.75, delta=1e-3)
        self.assertGreater(law.r_squared, 1 - 1e-6)

    def test_power_law_needs_samples(self):
        with self.assertRaises(ConfigError):
            fit_power_law(self.res, samples=2)

    def test_phi_is_anchored_and_monotone(self):
        self.assertEqual(float(self.res.phi.values[0]), 0.0)
        self.assertEqual(self.res.phi.valid_range, self.res.overlap)
        fine = np.linspace(*self.res.overlap, 1001)
        self.assertTrue(np.all(np.diff(self.res.phi(fine)) > 0))

    def test_recalibrated_temperature_is_affine_in_xy(self):
        xs, ys, T = UncalibratedService.temperature_grid(self.res, 20, 20)
        gx, gy = np.meshgrid(xs, ys)
        finite = np.isfinite(T)
        self.assertGreater(int(finite.sum()), 20)
        correlation = np.corrcoef(T[finite], (gx * gy)[finite])[0, 1]
        self.assertGreaterEqual(correlation, 1 - 1e-6)

    def test_temperature_at_point(self):
        # phi(X~) = 1.5 * (sqrt(X~) - sqrt(lo)) with sqrt(X~) = x*y
        lo = self.res.overlap[0]
        value = recalibrated_temperature_at(self.res, 1.2, 1.2)
        self.assertAlmostEqual(value, 1.5 * (1.44 - np.sqrt(lo)), delta=1e-6)

    def test_outside_overlap_is_refused(self):
        with self.assertRaises(OutOfRangeError):
            normalized_entropy_at(self.res, 0.3, 0.3)
        with self.assertRaises(OutOfRangeError):
            recalibrated_temperature_at(self.res, 3.9, 3.9)

    def test_masked_normalized_grid(self):
        xs, ys, N = UncalibratedService.normalized_entropy_grid(self.res, 20, 20)
        gx, gy = np.meshgrid(xs, ys)
        inside = self.res.contains(self.ctx.f.evaluate(x=gx, y=gy))
        np.testing.assert_array_equal(np.isfinite(N), inside)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(min_value=1.1, max_value=1.7),
        st.floats(min_value=0.45, max_value=2.5),
        st.floats(min_value=0.45, max_value=2.5),
    )
    def test_monotone_along_isotherm(self, product, x1, x2):
        """On one isotherm normalized entropy orders points like Y~ does"""
        x = np.array([x1, x2])
        y = product / x
        N = self.res.evaluate_many(x, y)
        _, Y_t = self.ctx.forward_tilde_many(x, y)
        if abs(Y_t[0] - Y_t[1]) > 1e-9:
            self.assertEqual(np.sign(N[0] - N[1]), np.sign(Y_t[0] - Y_t[1]))


class IdealGasRecalibrationTests(SimpleTestCase):
    """For a correctly calibrated gas the recalibration is affine"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = TransformContext.build("x*y", WIDE, Y_ref=1.0)
        cls.res = UncalibratedService.reconstruct(cls.ctx, first_adiabat(), second_adiabat(), 257)

    def test_normalized_entropy_is_log_of_adiabat_invariant(self):
        rng = np.random.default_rng(11)
        product = rng.uniform(self.res.overlap[0] + 0.01, self.res.overlap[1] - 0.01, 40)
        x = rng.uniform(0.5, 2.0, 40)
        y = product / x
        keep = (y > 0.25) & (y < 4.0)
        N = self.res.evaluate_many(x[keep], y[keep])
        np.testing.assert_allclose(N, np.log(x[keep] * y[keep] ** (5.0 / 3.0)), atol=1e-6)

    def test_phi_is_affine(self):
        lo, hi = self.res.overlap
        X = np.linspace(lo, hi, 257)
        np.testing.assert_allclose(self.res.phi(X), 1.5 * (X - lo), atol=1e-6)

    def test_agrees_with_single_adiabat_reconstruction(self):
        field = CalibratedService.reconstruct(self.ctx, first_adiabat(), 257)
        rng = np.random.default_rng(5)
        product = rng.uniform(self.res.overlap[0] + 0.01, self.res.overlap[1] - 0.01, 20)
        x = rng.uniform(0.6, 1.6, 20)
        y = product / x
        keep = (y > 0.25) & (y < 4.0) & field.contains(product)
        S = field.evaluate_many(x[keep], y[keep])
        N = self.res.evaluate_many(x[keep], y[keep])
        # both are increasing functions of x*y^gamma: S = 1.5 N
        np.testing.assert_allclose(S, 1.5 * N, atol=1e-6)


class RecalibrationErrorTests(SimpleTestCase):
    def setUp(self):
        self.ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)

    def test_crossing_adiabats(self):
        a0 = CurveSpec.explicit(parse("x^(-0.6)"))
        a1 = CurveSpec.explicit(parse("x^(-0.2)"))
        with self.assertRaises(CrossingAdiabatsError):
            reconstruct_uncalibrated(self.ctx, a0, a1, 65)

    def test_disjoint_isotherm_ranges(self):
        a0 = CurveSpec.explicit(parse("x^(-0.6)"), x_range=(0.5, 0.7))
        a1 = CurveSpec.explicit(parse("x^(-0.6)"), x_range=(1.5, 2.0))
        with self.assertRaises(EmptyOverlapError) as caught:
            reconstruct_uncalibrated(self.ctx, a0, a1, 33)
        self.assertEqual(caught.exception.exit_code, 2)
