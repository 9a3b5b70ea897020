import numpy as np
from django.conf import settings as django_settings
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.core.exceptions import ConfigError, DomainError, InversionError, SignScanError
from apps.expr.functions import FunctionRegistry
from apps.oracles.fixtures import (
    IDEAL_GAS,
    PHI_GAS,
    SQUARED_CALIBRATION,
    VARIABLE_GAMMA,
    load_fixture,
)
from apps.transform.constants import Orientation
from apps.transform.context import Domain, TildePoint, TransformContext
from apps.transform.services import (
    TransformService,
    forward_tilde,
    forward_XY,
    invert_tilde,
    invert_XY,
    jacobian_det,
    psi,
)

LN2 = float(np.log(2.0))


def ideal_gas(domain=(0.5, 4.0, 0.5, 8.0), **kwargs) -> TransformContext:
    return TransformContext.build("x*y", domain, Y_ref=1.0, **kwargs)


def phi_gas() -> TransformContext:
    registry = FunctionRegistry()
    registry.register("phi", "t + t^2/2", derivative="1 + t", monotone=True)
    return TransformContext.build("phi(x*y)", (0.25, 3.0, 0.25, 4.0), Y_ref=1.0, functions=registry)


class DomainTests(SimpleTestCase):
    def test_rejects_empty_rectangle(self):
        with self.assertRaises(ConfigError):
            Domain(1.0, 1.0, 0.0, 1.0)

    def test_rejects_non_finite_bounds(self):
        with self.assertRaises(ConfigError):
            Domain(0.0, float("inf"), 0.0, 1.0)

    def test_coerce_mapping_and_sequence(self):
        expected = Domain(0.5, 2.0, 0.25, 4.0)
        self.assertEqual(Domain.coerce({"x_min": 0.5, "x_max": 2, "y_min": 0.25, "y_max": 4}), expected)
        self.assertEqual(Domain.coerce([0.5, 2, 0.25, 4]), expected)

    def test_contains_closed_rectangle(self):
        d = Domain(0.5, 2.0, 0.5, 2.0)
        np.testing.assert_array_equal(d.contains([0.5, 2.0, 2.1], [2.0, 0.5, 1.0]), [True, True, False])


class BuildTests(SimpleTestCase):
    def test_default_anchor_is_low_end_of_free_range(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0))
        self.assertEqual(ctx.Y_ref, 0.5)

    def test_anchor_outside_free_range(self):
        with self.assertRaises(ConfigError):
            TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=3.0)

    def test_unknown_orientation(self):
        with self.assertRaises(ConfigError):
            TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), orientation="z-solve")

    def test_zero_tolerance(self):
        with self.assertRaises(ConfigError):
            TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), root_tol=0.0)

    def test_sign_scan_rejects_vanishing_partial(self):
        with self.assertRaises(SignScanError) as caught:
            TransformContext.build("x^2*y^2", (0.5, 2.0, 0.0, 2.0))
        error = caught.exception
        self.assertEqual(error.exit_code, 2)
        self.assertIn("restrict the domain", error.message)
        self.assertEqual(error.subregion[2], 0.0)

    def test_sign_scan_suggests_other_orientation(self):
        with self.assertRaises(SignScanError) as caught:
            TransformContext.build("x*y", (-1.0, 1.0, 0.5, 2.0))
        self.assertIn("x-solve", caught.exception.message)

    def test_other_orientation_passes(self):
        ctx = TransformContext.build("x*y", (-1.0, 1.0, 0.5, 2.0), orientation="x-solve")
        self.assertEqual(ctx.orientation, Orientation.X_SOLVE)
        self.assertTrue(TransformService.sign_scan(ctx, points=65).ok)


    def test_finer_rescan_finds_sign_change_between_nodes(self):
        # f_y = (x - 0.2)(x - 0.3) is positive on the nodes x = 0, 0.5, 1
        ctx = TransformContext.build("y*(x - 0.2)*(x - 0.3)", (0.0, 1.0, 0.5, 2.0), scan_grid=3)
        self.assertTrue(TransformService.sign_scan(ctx).ok)
        fine = TransformService.sign_scan(ctx, points=5)
        self.assertFalse(fine.ok)
        self.assertLess(fine.minimum, 0.0)


class CoordinateTests(SimpleTestCase):
    def test_forward_XY(self):
        self.assertEqual(forward_XY(ideal_gas(), 2, 3), (6.0, 2.0))
        squared = TransformContext.build("x^2*y^2", (0.5, 2.0, 0.5, 2.0))
        self.assertEqual(forward_XY(squared, 1, 1), (1.0, 1.0))

    def test_forward_XY_outside_domain(self):
        with self.assertRaises(DomainError):
            forward_XY(ideal_gas(), 5, 1)

    def test_forward_XY_through_calibration(self):
        X, Y = forward_XY(phi_gas(), 1, 1)
        self.assertAlmostEqual(X, 1.5)
        self.assertEqual(Y, 1.0)

    def test_invert_XY(self):
        x, y = invert_XY(ideal_gas(), 6, 2)
        self.assertAlmostEqual(x, 2.0, places=12)
        self.assertAlmostEqual(y, 3.0, places=10)
        x, y = invert_XY(ideal_gas(), 1, 1)
        self.assertAlmostEqual(y, 1.0, places=10)

    def test_invert_XY_through_calibration(self):
        x, y = invert_XY(phi_gas(), 1.5, 1)
        self.assertEqual(x, 1.0)
        self.assertAlmostEqual(y, 1.0, places=10)

    def test_invert_XY_outside_free_range(self):
        with self.assertRaises(InversionError):
            invert_XY(ideal_gas(), 6, 10)

    def test_isotherm_span(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        start, end = ctx.isotherm_span(np.array([1.0, 2.0]))
        np.testing.assert_allclose(start, [0.5, 1.0], atol=1e-10)
        np.testing.assert_allclose(end, [2.0, 2.0], atol=1e-10)


class PsiTests(SimpleTestCase):
    def test_ideal_gas_is_minus_log(self):
        self.assertAlmostEqual(psi(ideal_gas(), 3.0, 2.0), -LN2, delta=1e-9)

    def test_vanishes_at_anchor(self):
        self.assertAlmostEqual(psi(ideal_gas(), 3.0, 1.0), 0.0, delta=1e-14)

    def test_calibrated_gas(self):
        self.assertAlmostEqual(psi(phi_gas(), 1.5, float(np.e)), -0.5, delta=1e-8)

    def test_monotone_along_isotherm(self):
        ctx = TransformContext.build("x^2*y^2", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        Y = np.linspace(0.55, 1.95, 40)
        values = ctx.psi_many(np.full_like(Y, 1.0), Y)
        self.assertTrue(np.all(np.diff(values) < 0))


class TildeTests(SimpleTestCase):
    def test_ideal_gas_forward(self):
        p = forward_tilde(ideal_gas(), 2, 3)
        self.assertAlmostEqual(p.X, 6.0, places=12)
        self.assertAlmostEqual(p.Y, -LN2, delta=1e-9)

    def test_ideal_gas_on_anchor(self):
        p = forward_tilde(ideal_gas(), 1, 5)
        self.assertAlmostEqual(p.X, 5.0, places=12)
        self.assertAlmostEqual(p.Y, 0.0, delta=1e-12)

    def test_squared_gas_forward(self):
        ctx = TransformContext.build("x^2*y^2", (0.5, 4.0, 0.5, 4.0), Y_ref=1.0)
        p = forward_tilde(ctx, 2, 1)
        self.assertAlmostEqual(p.X, 4.0, places=12)
        self.assertAlmostEqual(p.Y, -LN2 / 4.0, delta=1e-9)

    def test_ideal_gas_inverse(self):
        x, y = invert_tilde(ideal_gas(), TildePoint(6.0, -LN2))
        self.assertAlmostEqual(x, 2.0, delta=1e-9)
        self.assertAlmostEqual(y, 3.0, delta=1e-9)

    def test_tilde_point_must_be_finite(self):
        with self.assertRaises(DomainError):
            TildePoint(float("nan"), 0.0)

    @settings(max_examples=25, deadline=None)
    @given(st.floats(min_value=0.55, max_value=1.95), st.floats(min_value=0.55, max_value=1.95))
    def test_round_trip(self, x, y):
        """invert_tilde undoes forward_tilde inside the domain"""
        ctx = TransformContext.build("x^2*y^2", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        xr, yr = invert_tilde(ctx, forward_tilde(ctx, x, y))
        self.assertAlmostEqual(xr, x, delta=1e-7)
        self.assertAlmostEqual(yr, y, delta=1e-7)


class JacobianTests(SimpleTestCase):
    def test_ideal_gas_preserves_area(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        for x, y in [(0.8, 0.9), (1.2, 1.5), (1.7, 0.6)]:
            self.assertAlmostEqual(jacobian_det(ctx, x, y, 1e-3), 1.0, delta=1e-5)

    def test_squared_gas_preserves_area(self):
        ctx = TransformContext.build("x^2*y^2", (0.25, 4.0, 0.25, 4.0), Y_ref=1.0)
        self.assertAlmostEqual(jacobian_det(ctx, 1.5, 0.8, 1e-3), 1.0, delta=1e-5)

    def test_x_solve_reverses_orientation(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), orientation="x-solve", Y_ref=1.0)
        self.assertEqual(ctx.expected_det, -1)
        x = np.array([0.7, 1.1, 1.6, 1.9])
        y = np.array([0.6, 1.4, 0.9, 1.8])
        det = ctx.jacobian_det_many(x, y, 1e-3, 1e-3)
        np.testing.assert_allclose(det, -1.0, atol=1e-5)

    def test_stencil_step_must_be_positive(self):
        with self.assertRaises(DomainError):
            jacobian_det(ideal_gas(), 1.0, 1.0, 0.0)

    def test_round_trip_error_helper(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        errors = TransformService.round_trip_error(ctx, np.array([0.6, 1.3]), np.array([1.9, 0.7]))
        self.assertLessEqual(float(errors.max()), 1e-7)


class BoundaryRoundTripTests(SimpleTestCase):
    def setUp(self):
        self.ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)

    def test_edge_points_map_back(self):
        edges = [(2.0, 1.0), (0.5, 1.0), (1.0, 2.0), (1.2, 0.5), (2.0, 0.5), (0.5, 2.0)]
        for x, y in edges:
            with self.subTest(point=(x, y)):
                xr, yr = invert_tilde(self.ctx, forward_tilde(self.ctx, x, y))
                self.assertAlmostEqual(xr, x, delta=1e-9)
                self.assertAlmostEqual(yr, y, delta=1e-9)

    def test_corners_with_single_point_isotherms(self):
        for x, y in [(0.5, 0.5), (2.0, 2.0)]:
            with self.subTest(point=(x, y)):
                xr, yr = invert_tilde(self.ctx, forward_tilde(self.ctx, x, y))
                self.assertAlmostEqual(xr, x, delta=1e-9)
                self.assertAlmostEqual(yr, y, delta=1e-9)

    def test_default_anchor_is_exact(self):
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0))
        self.assertEqual(float(ctx.anchor(np.array([1.0]))[0]), 0.5)
        self.assertEqual(psi(ctx, 1.0, 0.5), 0.0)


SHIPPED_SMOOTH = (IDEAL_GAS, SQUARED_CALIBRATION, PHI_GAS, VARIABLE_GAMMA)


def interior_points(domain: Domain, count: int, seed: int, margin: float = 0.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    mx, my = margin * domain.width, margin * domain.height
    xs = rng.uniform(domain.x_min + mx, domain.x_max - mx, count)
    ys = rng.uniform(domain.y_min + my, domain.y_max - my, count)
    return np.column_stack([xs, ys])


def edge_points(domain: Domain, per_edge: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, per_edge)
    xs = domain.x_min + t * domain.width
    ys = domain.y_min + t * domain.height
    return np.concatenate(
        [
            np.column_stack([np.full_like(ys, domain.x_min), ys]),
            np.column_stack([np.full_like(ys, domain.x_max), ys]),
            np.column_stack([xs, np.full_like(xs, domain.y_min)]),
            np.column_stack([xs, np.full_like(xs, domain.y_max)]),
        ]
    )


class FixtureRoundTripTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.contexts = {name: load_fixture(name).context() for name in SHIPPED_SMOOTH}

    def test_random_points(self):
        for name, ctx in self.contexts.items():
            with self.subTest(fixture=name):
                points = interior_points(ctx.domain, 200, seed=31)
                errors = TransformService.round_trip_error(ctx, points[:, 0], points[:, 1])
                self.assertLessEqual(float(errors.max()), 1e-7)

    def test_domain_edges(self):
        for name, ctx in self.contexts.items():
            with self.subTest(fixture=name):
                points = edge_points(ctx.domain, 9)
                errors = TransformService.round_trip_error(ctx, points[:, 0], points[:, 1])
                self.assertLessEqual(float(errors.max()), 1e-7)

    def test_calibrated_gas_point(self):
        ctx = self.contexts[PHI_GAS]
        xr, yr = invert_tilde(ctx, forward_tilde(ctx, 1.3, 0.9))
        self.assertAlmostEqual(xr, 1.3, delta=1e-8)
        self.assertAlmostEqual(yr, 0.9, delta=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(
        st.sampled_from(SHIPPED_SMOOTH),
        st.sampled_from(["inside", "left", "right", "bottom", "top"]),
        st.floats(min_value=0.0, max_value=1.0),
        st.floats(min_value=0.0, max_value=1.0),
    )
    def test_round_trip_with_edges(self, name, where, u, v):
        """Points on the closed domain, edges and corners included, map back"""
        ctx = self.contexts[name]
        d = ctx.domain
        u = {"left": 0.0, "right": 1.0}.get(where, u)
        v = {"bottom": 0.0, "top": 1.0}.get(where, v)
        x = min(d.x_min + u * d.width, d.x_max)
        y = min(d.y_min + v * d.height, d.y_max)
        xr, yr = invert_tilde(ctx, forward_tilde(ctx, x, y))
        self.assertAlmostEqual(xr, x, delta=1e-7)
        self.assertAlmostEqual(yr, y, delta=1e-7)


class MonotonicityTests(SimpleTestCase):
    def assert_columns_monotone(self, ctx: TransformContext, X_columns: np.ndarray):
        expected = -ctx.scan.sign
        for X in X_columns:
            start, end = ctx.isotherm_span(np.array([X]))
            free = np.linspace(start[0], end[0], 41)[1:-1]
            x, y = ctx.invert_XY_many(np.full_like(free, X), free)
            _, Y_t = ctx.forward_tilde_many(x, y)
            steps = np.diff(Y_t)
            self.assertTrue(np.all(np.sign(steps) == expected), f"not monotone on X~={X!r}")

    def test_fixtures_along_fixed_temperature(self):
        for name in SHIPPED_SMOOTH:
            with self.subTest(fixture=name):
                ctx = load_fixture(name).context()
                points = interior_points(ctx.domain, 6, seed=3, margin=0.1)
                self.assert_columns_monotone(ctx, ctx.f.evaluate(x=points[:, 0], y=points[:, 1]))

    def test_x_solve_moves_against_f_x(self):
        ctx = TransformContext.build("x*y", (-1.0, 1.0, 0.5, 2.0), orientation="x-solve", Y_ref=1.0)
        self.assertEqual(ctx.scan.sign, 1)
        self.assert_columns_monotone(ctx, np.array([-0.6, 0.2, 0.9]))

    def test_fixed_x_column_of_ideal_gas_is_flat(self):
        # Y~ = -ln x, so at fixed x the only ordering is along the isotherms
        ctx = TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)
        y = np.linspace(0.6, 1.9, 10)
        _, Y_t = ctx.forward_tilde_many(np.full_like(y, 1.4), y)
        np.testing.assert_allclose(Y_t, -np.log(1.4), atol=1e-9)


class FixtureJacobianTests(SimpleTestCase):
    def test_area_preserved_at_random_points(self):
        for name in SHIPPED_SMOOTH:
            with self.subTest(fixture=name):
                ctx = load_fixture(name).context()
                count = django_settings.ADIABAT_AUDIT_POINTS
                seed = django_settings.ADIABAT_AUDIT_SEED
                points = interior_points(ctx.domain, count, seed, margin=0.02)
                h = 1e-4 * ctx.domain.scale
                det = ctx.jacobian_det_many(points[:, 0], points[:, 1], h, h)
                self.assertLessEqual(float(np.max(np.abs(det - 1.0))), 1e-5)
