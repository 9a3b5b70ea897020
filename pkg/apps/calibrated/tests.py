import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import cdist

from apps.calibrated.contours import marching_squares
from apps.calibrated.curves import CurveKind, CurveSpec, curve_residual, sample_curve
from apps.calibrated.graph import GraphFunction
from apps.calibrated.services import CalibratedService, build_graph, entropy_at, level_curves
from apps.core.exceptions import (
    ConfigError,
    CurveError,
    DomainError,
    GraphError,
    OutOfRangeError,
)
from apps.core.numerics import central_gradient
from apps.expr.services import parse
from apps.transform.context import TransformContext

GAMMA = 5.0 / 3.0


def ideal_ctx() -> TransformContext:
    return TransformContext.build("x*y", (0.5, 2.0, 0.5, 2.0), Y_ref=1.0)


def ideal_adiabat() -> CurveSpec:
    return CurveSpec.explicit(parse("x^(-0.6)"))


def ideal_entropy(x, y):
    return np.log(x * y**GAMMA) / (GAMMA - 1.0)


class CurveSpecTests(SimpleTestCase):
    def test_explicit_only_uses_x(self):
        with self.assertRaises(ConfigError):
            CurveSpec.explicit(parse("x*y"))

    def test_explicit_range_must_be_ordered(self):
        with self.assertRaises(ConfigError):
            CurveSpec.explicit(parse("x"), x_range=(2.0, 1.0))

    def test_point_list_needs_four_points(self):
        with self.assertRaises(ConfigError):
            CurveSpec.from_points([[0.6, 1.0], [0.8, 1.1], [1.0, 1.2]])

    def test_point_list_is_sorted_and_strict(self):
        spec = CurveSpec.from_points([[1.0, 1.0], [0.6, 1.2], [1.4, 0.9], [0.8, 1.1]])
        np.testing.assert_array_equal(spec.points[:, 0], [0.6, 0.8, 1.0, 1.4])
        with self.assertRaises(ConfigError):
            CurveSpec.from_points([[1.0, 1.0], [1.0, 1.2], [1.4, 0.9], [0.8, 1.1]])

    def test_describe(self):
        self.assertEqual(CurveSpec.implicit(parse("x*y - 1")).describe(), "((x * y) - 1) = 0")
        self.assertEqual(ideal_adiabat().describe(), "y = (x ^ (-0.6))")
        self.assertEqual(ideal_adiabat().kind, CurveKind.EXPLICIT)


class SampleCurveTests(SimpleTestCase):
    def test_explicit_points_are_exact(self):
        points = sample_curve(ideal_adiabat(), ideal_ctx(), 5)
        xs = np.linspace(0.5, 2.0, 5)
        np.testing.assert_array_equal(points[:, 0], xs)
        np.testing.assert_array_equal(points[:, 1], np.power(xs, -0.6))

    def test_explicit_curve_leaving_domain(self):
        with self.assertRaises(CurveError):
            sample_curve(CurveSpec.explicit(parse("2*x")), ideal_ctx(), 9)

    def test_explicit_sub_range(self):
        spec = CurveSpec.explicit(parse("x^(-0.6)"), x_range=(0.8, 1.2))
        points = sample_curve(spec, ideal_ctx(), 4)
        self.assertEqual(points[0, 0], 0.8)
        self.assertEqual(points[-1, 0], 1.2)

    def test_implicit_residual(self):
        spec = CurveSpec.implicit(parse("x*y^(5/3) - 1"))
        points = sample_curve(spec, ideal_ctx(), 65)
        self.assertEqual(points.shape, (65, 2))
        self.assertLessEqual(float(curve_residual(spec, points).max()), 1e-10)
        self.assertTrue(np.all(np.diff(points[:, 0]) > 0))

    def test_implicit_without_solution(self):
        with self.assertRaises(CurveError):
            sample_curve(CurveSpec.implicit(parse("x*y - (-1)")), ideal_ctx(), 9)

    def test_implicit_with_two_branches(self):
        with self.assertRaises(CurveError) as caught:
            sample_curve(CurveSpec.implicit(parse("(y - 1)^2 - 0.01")), ideal_ctx(), 9)
        self.assertIsNotNone(caught.exception.station)

    def test_implicit_falls_back_to_y_stations(self):
        points = sample_curve(CurveSpec.implicit(parse("x - 1.3")), ideal_ctx(), 9)
        np.testing.assert_allclose(points[:, 0], 1.3, atol=1e-11)
        self.assertAlmostEqual(float(points[0, 1]), 0.5)
        self.assertAlmostEqual(float(points[-1, 1]), 2.0)

    def test_implicit_clipped_by_domain(self):
        # x*y = 2 enters through the top edge at x = 1 and leaves through the right edge
        points = sample_curve(CurveSpec.implicit(parse("x*y - 2")), ideal_ctx(), 33)
        self.assertAlmostEqual(float(points[0, 0]), 1.0, places=6)
        self.assertAlmostEqual(float(points[-1, 0]), 2.0, places=12)
        np.testing.assert_allclose(points[:, 0] * points[:, 1], 2.0, atol=1e-10)

    def test_point_list_outside_domain(self):
        spec = CurveSpec.from_points([[0.6, 1.0], [0.8, 1.1], [1.0, 1.2], [3.0, 1.3]])
        with self.assertRaises(CurveError):
            sample_curve(spec, ideal_ctx(), 9)

    def test_too_few_samples(self):
        with self.assertRaises(ConfigError):
            sample_curve(ideal_adiabat(), ideal_ctx(), 3)


class GraphFunctionTests(SimpleTestCase):
    def setUp(self):
        self.X = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        self.graph = GraphFunction(self.X, np.log(self.X), name="F")

    def test_passes_through_breakpoints(self):
        np.testing.assert_allclose(self.graph(self.X), np.log(self.X), rtol=0, atol=1e-12)

    def test_refuses_extrapolation(self):
        with self.assertRaises(OutOfRangeError) as caught:
            self.graph(5.5)
        self.assertEqual(caught.exception.valid_range, (1.0, 5.0))
        with self.assertRaises(OutOfRangeError):
            self.graph.derivative(np.array([0.5, 2.0]))

    def test_masked_evaluation(self):
        values = self.graph.evaluate_masked(np.array([0.5, 2.0, 6.0]))
        self.assertTrue(np.isnan(values[0]) and np.isnan(values[2]))
        self.assertAlmostEqual(float(values[1]), np.log(2.0))

    def test_shape_preserving(self):
        fine = np.linspace(1.0, 5.0, 401)
        self.assertTrue(np.all(np.diff(self.graph(fine)) > 0))

    def test_breakpoints_must_increase(self):
        with self.assertRaises(GraphError):
            GraphFunction(np.array([1.0, 1.0, 2.0]), np.array([0.0, 1.0, 2.0]))
        with self.assertRaises(GraphError):
            GraphFunction(np.array([1.0]), np.array([0.0]))

    def test_rows(self):
        self.assertEqual(self.graph.as_rows()[0], [1.0, 0.0])
        self.assertEqual(self.graph.coefficients.shape, (4, 4))


class BuildGraphTests(SimpleTestCase):
    def test_ideal_gas_adiabat_is_a_log(self):
        ctx = ideal_ctx()
        points = sample_curve(ideal_adiabat(), ctx, 33)
        graph = build_graph(points, ctx)
        # Y~ = -(gamma / (gamma - 1)) ln X~
        expected = -(GAMMA / (GAMMA - 1.0)) * np.log(graph.breakpoints)
        np.testing.assert_allclose(graph.values, expected, atol=1e-9)
        lo, hi = graph.valid_range
        self.assertAlmostEqual(lo, 2.0**-0.4, places=12)
        self.assertAlmostEqual(hi, 2.0**0.4, places=12)

    def test_isotherm_met_twice(self):
        points = [[0.8, 1.0], [1.0, 1.0], [2.0, 0.5], [1.5, 1.5]]
        with self.assertRaises(GraphError):
            build_graph(points, ideal_ctx())

    def test_fold_in_curve_order(self):
        points = [[0.6, 1.0], [1.0, 1.0], [1.5, 1.0], [1.5, 0.8]]
        with self.assertRaises(GraphError):
            build_graph(points, ideal_ctx())

    def test_too_few_points(self):
        with self.assertRaises(GraphError):
            build_graph([[0.6, 1.0], [1.0, 1.0], [1.5, 1.0]], ideal_ctx())

    def test_points_outside_domain(self):
        with self.assertRaises(DomainError):
            build_graph([[0.6, 1.0], [1.0, 1.0], [1.5, 1.0], [2.5, 1.0]], ideal_ctx())

    def test_equal_duplicates_are_merged(self):
        points = [[0.6, 1.0], [1.0, 1.0], [1.0, 1.0], [1.2, 1.0], [1.5, 1.0]]
        with self.assertLogs("apps.calibrated.services", level="WARNING"):
            graph = build_graph(points, ideal_ctx())
        self.assertEqual(graph.breakpoints.size, 4)


class EntropyFieldTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = ideal_ctx()
        cls.field = CalibratedService.reconstruct(cls.ctx, ideal_adiabat(), 257)

    def test_gauge_on_adiabat(self):
        x, y = self.field.adiabat[:, 0], self.field.adiabat[:, 1]
        self.assertLessEqual(float(np.max(np.abs(self.field.evaluate_many(x, y)))), 1e-7)
        px, py = self.field.adiabat[100]
        self.assertAlmostEqual(entropy_at(self.field, px, py), 0.0, delta=1e-7)

    def test_matches_closed_form(self):
        xs, ys, S = CalibratedService.entropy_grid(self.field, 30, 30)
        gx, gy = np.meshgrid(xs, ys)
        finite = np.isfinite(S)
        self.assertGreater(int(finite.sum()), 200)
        difference = S[finite] - ideal_entropy(gx[finite], gy[finite])
        self.assertLessEqual(float(np.std(difference)), 1e-6)

    def test_grid_masks_outside_band(self):
        xs, ys, S = CalibratedService.entropy_grid(self.field, 30, 30)
        gx, gy = np.meshgrid(xs, ys)
        inside = self.field.contains(gx * gy)
        np.testing.assert_array_equal(np.isfinite(S), inside)

    def test_outside_band_is_refused(self):
        with self.assertRaises(OutOfRangeError):
            entropy_at(self.field, 0.5, 0.5)
        with self.assertRaises(DomainError):
            entropy_at(self.field, 3.0, 0.4)

    def test_valid_band(self):
        lo, hi = CalibratedService.valid_band(self.field)
        self.assertAlmostEqual(lo, 2.0**-0.4, places=12)
        self.assertAlmostEqual(hi, 2.0**0.4, places=12)

    @settings(max_examples=30, deadline=None)
    @given(
        st.floats(min_value=0.8, max_value=1.25),
        st.floats(min_value=0.7, max_value=1.4),
        st.floats(min_value=0.7, max_value=1.4),
    )
    def test_slope_one_along_isotherm(self, c, x1, x2):
        """At fixed X~ entropy moves one-for-one with Y~"""
        x = np.array([x1, x2])
        y = c / x
        S = self.field.evaluate_many(x, y)
        _, Y_t = self.ctx.forward_tilde_many(x, y)
        self.assertAlmostEqual(float(S[0] - S[1]), float(Y_t[0] - Y_t[1]), delta=1e-10)

    def test_temperature_entropy_map_preserves_area(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0.8, 1.2, 100)
        y = rng.uniform(0.9, 1.1, 100) / x
        h = 1e-4
        S_x, S_y = central_gradient(self.field.evaluate_many, x, y, h)
        # grad f = (y, x) for f = x*y
        det = y * S_y - x * S_x
        np.testing.assert_allclose(det, 1.0, atol=1e-4)


class LevelCurveTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.ctx = ideal_ctx()
        cls.field = CalibratedService.reconstruct(cls.ctx, ideal_adiabat(), 257)
        cls.curves = level_curves(cls.field, [0.0, 0.5, 10.0], (60, 60))

    def test_one_entry_per_level(self):
        self.assertEqual(len(self.curves), 3)

    def test_level_zero_follows_adiabat(self):
        self.assertTrue(self.curves[0])
        cell = 1.5 / 59
        for polyline in self.curves[0]:
            distance = cdist(polyline, self.field.adiabat).min(axis=1)
            self.assertLessEqual(float(distance.max()), cell)

    def test_levels_follow_closed_form_family(self):
        self.assertTrue(self.curves[1])
        for polyline in self.curves[1]:
            values = ideal_entropy(polyline[:, 0], polyline[:, 1])
            np.testing.assert_allclose(values, 0.5, atol=2e-3)

    def test_unattained_level_is_empty(self):
        self.assertEqual(self.curves[2], [])

    def test_grid_too_coarse(self):
        with self.assertRaises(ConfigError):
            level_curves(self.field, [0.0], (8, 60))

    def test_levels_must_be_finite(self):
        with self.assertRaises(ConfigError):
            level_curves(self.field, [float("nan")], (20, 20))


class MarchingSquaresTests(SimpleTestCase):
    def setUp(self):
        self.xs = np.linspace(-1.0, 1.0, 21)
        self.ys = np.linspace(-1.0, 1.0, 21)
        self.gx, self.gy = np.meshgrid(self.xs, self.ys)

    def test_circle_is_closed(self):
        polylines = marching_squares(self.xs, self.ys, self.gx**2 + self.gy**2, 0.3)
        self.assertEqual(len(polylines), 1)
        circle = polylines[0]
        np.testing.assert_array_equal(circle[0], circle[-1])
        np.testing.assert_allclose(np.hypot(circle[:, 0], circle[:, 1]), np.sqrt(0.3), atol=0.02)

    def test_plane_gives_straight_open_line(self):
        polylines = marching_squares(self.xs, self.ys, self.gx, 0.05)
        self.assertEqual(len(polylines), 1)
        line = polylines[0]
        self.assertEqual(len(line), 21)
        np.testing.assert_allclose(line[:, 0], 0.05, atol=1e-12)
        self.assertEqual({line[0, 1], line[-1, 1]}, {-1.0, 1.0})

    def test_masked_row_splits_line(self):
        Z = self.gx.copy()
        Z[10, :] = np.nan
        self.assertEqual(len(marching_squares(self.xs, self.ys, Z, 0.05)), 2)

    def test_level_outside_range(self):
        self.assertEqual(marching_squares(self.xs, self.ys, self.gx, 2.0), [])

    def test_saddle_cells(self):
        Z = np.array([[1.0, -1.0], [-1.0, 1.0]])
        axis = np.array([0.0, 1.0])
        for level in (0.5, -0.5):
            polylines = marching_squares(axis, axis, Z, level)
            self.assertEqual(len(polylines), 2)
            self.assertTrue(all(len(p) == 2 for p in polylines))
        # centre below 0.5: the two high corners are cut off separately
        for polyline in marching_squares(axis, axis, Z, 0.5):
            corner = np.round(polyline.mean(axis=0))
            self.assertLessEqual(float(np.abs(polyline - corner).max()), 0.25 + 1e-12)

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            marching_squares(self.xs, self.ys[:-1], self.gx, 0.0)

    def test_contour_keeps_level_order(self):
        result = CalibratedService.contour(self.xs, self.ys, self.gx, [0.05, 5.0, -0.05])
        self.assertEqual([len(level) for level in result], [1, 0, 1])
