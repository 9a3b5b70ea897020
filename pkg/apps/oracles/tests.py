import numpy as np
from django.test import SimpleTestCase
from scipy.spatial.distance import cdist

from apps.calibrated.services import CalibratedService
from apps.core.exceptions import AuditError, ConfigError, DomainError
from apps.core.numerics import central_gradient
from apps.expr.services import parse
from apps.oracles.fixtures import (
    IDEAL_GAS,
    PHI_GAS,
    SHIPPED,
    SQUARED_CALIBRATION,
    VARIABLE_GAMMA,
    fixture_path,
    load_fixture,
)
from apps.oracles.services import (
    adiabat_ode_trace,
    closest_polyline,
    gradient_parallelism,
    hausdorff,
    ideal_gas_entropy,
    level_curve_through,
    oracle_field,
)


def band_points(field, count: int, seed: int, margin: float = 0.02) -> np.ndarray:
    """Random domain points whose isotherm lies well inside the field's band"""
    d = field.ctx.domain
    rng = np.random.default_rng(seed)
    x = rng.uniform(d.x_min + 0.05, d.x_max - 0.05, 40 * count)
    y = rng.uniform(d.y_min + 0.05, d.y_max - 0.05, 40 * count)
    lo, hi = field.valid_range
    X_t = field.ctx.f.evaluate(x=x, y=y)
    keep = (X_t > lo + margin * (hi - lo)) & (X_t < hi - margin * (hi - lo))
    points = np.column_stack([x, y])[keep][:count]
    assert len(points) == count
    return points


def distance_to(polyline: np.ndarray, reference: np.ndarray) -> float:
    """Largest distance from a polyline's vertices to a densely sampled reference curve"""
    return float(cdist(polyline, reference).min(axis=1).max())


class IdealGasEntropyTests(SimpleTestCase):
    def test_reference_state(self):
        self.assertEqual(ideal_gas_entropy(5 / 3, 1, 1), 0.0)

    def test_doubled_volume(self):
        self.assertAlmostEqual(ideal_gas_entropy(5 / 3, 1, 2), 2.5 * np.log(2.0), places=12)
        self.assertAlmostEqual(ideal_gas_entropy(5 / 3, 1, 2), 1.732868, places=6)

    def test_constant_on_generalised_parabola(self):
        x = np.linspace(0.2, 5.0, 50)
        np.testing.assert_allclose(ideal_gas_entropy(5 / 3, x, x ** (-0.6)), 0.0, atol=1e-12)

    def test_gamma_one_is_rejected(self):
        with self.assertRaises(ConfigError):
            ideal_gas_entropy(1.0, 1.0, 1.0)

    def test_non_positive_state(self):
        with self.assertRaises(DomainError):
            ideal_gas_entropy(5 / 3, 0.0, 1.0)


class FixtureTests(SimpleTestCase):
    def test_every_shipped_fixture_loads(self):
        for name in SHIPPED:
            with self.subTest(fixture=name):
                fixture = load_fixture(name)
                self.assertEqual(fixture.name, name)
                self.assertEqual(fixture.path, fixture_path(name))
                self.assertTrue(fixture.adiabats)

    def test_unknown_fixture(self):
        with self.assertRaises(ConfigError):
            load_fixture("van_der_waals")

    def test_closed_forms_are_constant_on_declared_adiabats(self):
        for name in (IDEAL_GAS, SQUARED_CALIBRATION, VARIABLE_GAMMA):
            fixture = load_fixture(name)
            ctx = fixture.context()
            for curve in fixture.adiabats:
                with self.subTest(fixture=name, curve=curve.describe()):
                    points = CalibratedService.sample_curve(curve, ctx, 129)
                    values = fixture.entropy.evaluate(x=points[:, 0], y=points[:, 1])
                    self.assertLessEqual(float(np.ptp(values)), 1e-10)

    def test_fixture_without_closed_form(self):
        fixture = load_fixture(PHI_GAS)
        self.assertIsNone(fixture.entropy)
        with self.assertRaises(ConfigError):
            oracle_field(fixture)
        with self.assertRaises(ConfigError):
            adiabat_ode_trace(fixture, (1.0, 1.0), 0.1)

    def test_tolerance_and_domain(self):
        fixture = load_fixture(IDEAL_GAS)
        self.assertEqual(fixture.tolerance, 1e-5)
        self.assertEqual(fixture.domain.x_min, 0.5)
        self.assertEqual(fixture.f.to_text(), "(x * y)")


class OdeTraceTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ideal = load_fixture(IDEAL_GAS)
        cls.variable_gamma = load_fixture(VARIABLE_GAMMA)

    def test_ideal_gas_trace_stays_on_adiabat(self):
        for span in (0.5, -0.8):
            trace = adiabat_ode_trace(self.ideal, (1.0, 1.0), span)
            residual = np.abs(trace[:, 0] * trace[:, 1] ** (5 / 3) - 1.0)
            self.assertLessEqual(float(residual.max()), 1e-8)
            self.assertAlmostEqual(float(np.sum(np.hypot(*np.diff(trace, axis=0).T))), abs(span), places=6)

    def test_variable_gamma_trace_keeps_invariant(self):
        gamma = self.variable_gamma.model.functions.get("gamma")
        trace = adiabat_ode_trace(self.variable_gamma, (1.0, 1.0), 0.4)
        s = trace[:, 0] * trace[:, 1] ** gamma(trace[:, 0] * trace[:, 1])
        self.assertLessEqual(float(np.abs(s - 1.0).max()), 1e-6)

    def test_zero_span(self):
        trace = adiabat_ode_trace(self.ideal, (1.2, 0.9), 0.0)
        np.testing.assert_array_equal(trace, [[1.2, 0.9]])

    def test_leaving_domain(self):
        with self.assertRaises(DomainError):
            adiabat_ode_trace(self.ideal, (1.0, 1.0), 5.0)

    def test_start_outside_domain(self):
        with self.assertRaises(DomainError):
            adiabat_ode_trace(self.ideal, (3.0, 1.0), 0.1)

    def test_clipped_trace_ends_on_boundary(self):
        trace = adiabat_ode_trace(self.ideal, (1.0, 1.0), 5.0, clip=True)
        self.assertAlmostEqual(float(trace[-1, 0]), 0.5, places=8)

    def test_whole_level_curve(self):
        curve = level_curve_through(self.ideal, (1.0, 1.0))
        self.assertAlmostEqual(float(curve[:, 0].min()), 0.5, places=8)
        self.assertAlmostEqual(float(curve[:, 0].max()), 2.0, places=8)
        residual = np.abs(curve[:, 0] * curve[:, 1] ** (5 / 3) - 1.0)
        self.assertLessEqual(float(residual.max()), 1e-8)


class ParallelismTests(SimpleTestCase):
    def setUp(self):
        self.S = oracle_field(load_fixture(IDEAL_GAS))
        self.pts = np.array([[0.7, 1.3], [1.0, 1.0], [1.6, 0.8], [1.9, 1.9]])

    def test_identical_fields(self):
        self.assertEqual(gradient_parallelism(self.S, self.S, self.pts), 0.0)

    def test_monotone_relabeling(self):
        relabeled = lambda x, y: 2.0 * self.S(x, y) + 7.0  # noqa: E731
        self.assertLessEqual(gradient_parallelism(self.S, relabeled, self.pts, h=1e-2), 1e-12)

    def test_different_families(self):
        other = lambda x, y: x + y  # noqa: E731
        self.assertGreater(gradient_parallelism(self.S, other, self.pts), 0.1)

    def test_degenerate_gradient(self):
        with self.assertRaises(AuditError):
            gradient_parallelism(self.S, lambda x, y: 0.0 * x, self.pts)

    def test_stencil_failure(self):
        log_x = parse("ln(x)")
        with self.assertRaises(AuditError):
            gradient_parallelism(self.S, lambda x, y: log_x.evaluate(x=x, y=y), [[1e-3, 1.0]], h=1e-2)


class GeometryTests(SimpleTestCase):
    def test_hausdorff(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        self.assertEqual(hausdorff(a, a), 0.0)
        self.assertAlmostEqual(hausdorff(a, a + [0.0, 0.1]), 0.1)
        self.assertAlmostEqual(hausdorff(a, a[:1]), 1.0)

    def test_closest_polyline(self):
        near = np.array([[0.0, 0.0], [1.0, 0.0]])
        far = np.array([[0.0, 5.0], [1.0, 5.0]])
        self.assertIs(closest_polyline([far, near], (0.5, 0.2)), near)
        self.assertIsNone(closest_polyline([], (0.5, 0.2)))


class IdealGasLevelSetTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.fixture = load_fixture(IDEAL_GAS)
        cls.field = CalibratedService.reconstruct(
            cls.fixture.context(), cls.fixture.adiabats[0], cls.fixture.model.config.samples
        )

    def test_entropy_constant_along_traced_level_curves(self):
        xs, ys, S = CalibratedService.entropy_grid(self.field, 30, 30)
        spread = float(np.nanmax(S) - np.nanmin(S))
        for point in band_points(self.field, 20, seed=3):
            trace = level_curve_through(self.fixture, tuple(point), samples=65)
            inside = self.field.contains(self.field.ctx.f.evaluate(x=trace[:, 0], y=trace[:, 1]))
            values = self.field.evaluate_many(trace[inside, 0], trace[inside, 1])
            self.assertLessEqual(float(np.ptp(values)), 2e-3 * spread)

    def test_level_curves_follow_closed_form_family(self):
        cell = 1.5 / 59
        for point in band_points(self.field, 5, seed=4, margin=0.1):
            level = float(self.field.evaluate_many(*point))
            polylines = CalibratedService.level_curves(self.field, [level], (60, 60))[0]
            polyline = closest_polyline(polylines, tuple(point))
            self.assertIsNotNone(polyline)
            trace = level_curve_through(self.fixture, tuple(point), samples=513)
            self.assertLessEqual(distance_to(polyline, trace), 2 * cell)


class VariableGammaTests(SimpleTestCase):
    """gamma(t) = 1 + 1/(1 + t) has no closed-form inversion; everything runs numerically"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.fixture = load_fixture(VARIABLE_GAMMA)
        cls.field = CalibratedService.reconstruct(
            cls.fixture.context(), cls.fixture.adiabats[0], cls.fixture.model.config.samples
        )

    def test_gradient_parallel_to_closed_form(self):
        points = band_points(self.field, 50, seed=9)
        deviation = gradient_parallelism(self.field.evaluate_many, oracle_field(self.fixture), points)
        self.assertLessEqual(deviation, self.fixture.tolerance)

    def test_gauge_on_adiabat(self):
        adiabat = self.field.adiabat
        S = self.field.evaluate_many(adiabat[:, 0], adiabat[:, 1])
        self.assertLessEqual(float(np.abs(S).max()), 1e-7)

    def test_contours_match_ode_traces(self):
        cell = 1.5 / 59
        for point in band_points(self.field, 5, seed=12, margin=0.1):
            level = float(self.field.evaluate_many(*point))
            polylines = CalibratedService.level_curves(self.field, [level], (60, 60))[0]
            polyline = closest_polyline(polylines, tuple(point))
            self.assertIsNotNone(polyline)
            trace = level_curve_through(self.fixture, tuple(point), samples=513)
            self.assertLessEqual(distance_to(polyline, trace), 2 * cell)

    def test_input_adiabat_contour_matches_ode_trace(self):
        cell = 1.5 / 59
        polylines = CalibratedService.level_curves(self.field, [0.0], (60, 60))[0]
        polyline = closest_polyline(polylines, (1.0, 1.0))
        self.assertIsNotNone(polyline)
        trace = level_curve_through(self.fixture, (1.0, 1.0), samples=513)
        self.assertLessEqual(distance_to(polyline, trace), 2 * cell)

        # away from the band edges the contour covers the whole trace
        lo, hi = self.field.valid_range
        X_t = self.field.ctx.f.evaluate(x=trace[:, 0], y=trace[:, 1])
        inner = trace[(X_t > lo + 0.25 * (hi - lo)) & (X_t < hi - 0.25 * (hi - lo))]
        self.assertGreater(len(inner), 10)
        self.assertLessEqual(distance_to(inner, polyline), 2 * cell)

    def test_temperature_entropy_determinant(self):
        points = band_points(self.field, 50, seed=21)
        x, y = points[:, 0], points[:, 1]
        h = 1e-4
        T = lambda px, py: self.field.ctx.f.evaluate(x=px, y=py)  # noqa: E731
        T_x, T_y = central_gradient(T, x, y, h)
        S_x, S_y = central_gradient(self.field.evaluate_many, x, y, h)
        np.testing.assert_allclose(T_x * S_y - T_y * S_x, 1.0, atol=1e-4)
