"""Tests for novas.transform module."""

import math
import unittest

import numpy as np

from novas.constants import BETA_BOUND, ORDER_CAP, ORDER_FLOOR
from novas.errors import CalibrationError, DegenerateWindowError, DomainError, PreconditionError
from novas.series import ReturnSeries, sample_kurtosis
from novas.simulate import SimModelSpec, as_percent_returns, generate
from novas.transform import (
    CalibrationGrids,
    CoefficientVector,
    GAFreeParams,
    MethodKind,
    build_exponential_coeffs,
    build_ga_coeffs,
    calibrate,
    diagnose,
    exponential_order,
    forward_transform,
    ga_order,
    inverse_transform,
    method_kinds,
)


def _model3(n=260, seed=11) -> ReturnSeries:
    return as_percent_returns(generate(SimModelSpec(3, n, seed)))


class TestMethodKind(unittest.TestCase):
    def test_beta_and_alpha_flags(self):
        self.assertFalse(MethodKind.GA_NO_BETA.has_beta)
        self.assertTrue(MethodKind.GA.has_beta)
        self.assertFalse(MethodKind.SIMPLE.alpha_free)
        self.assertTrue(MethodKind.GEN_SIMPLE.alpha_free)

    def test_method_kinds_accepts_values_and_labels(self):
        self.assertEqual(
            method_kinds(["ge", "P-GA", " GA "]),
            [MethodKind.GEN_EXPONENTIAL, MethodKind.GA_NO_BETA, MethodKind.GA],
        )

    def test_method_kinds_rejects_unknown(self):
        with self.assertRaises(ValueError):
            method_kinds(["arima"])


class TestCoefficientVector(unittest.TestCase):
    def test_simplex_violation(self):
        with self.assertRaises(DomainError):
            CoefficientVector(alpha=0.5, c=[0.3, 0.3], kind=MethodKind.GEN_SIMPLE)

    def test_negative_entry(self):
        with self.assertRaises(DomainError):
            CoefficientVector(alpha=0.0, c=[1.2, -0.2], kind=MethodKind.SIMPLE)

    def test_no_beta_kind_needs_zero_c0(self):
        with self.assertRaises(DomainError):
            CoefficientVector(alpha=0.0, c=[0.5, 0.5], kind=MethodKind.GA_NO_BETA)

    def test_bound(self):
        v = CoefficientVector(alpha=0.0, c=[0.1, 0.9], kind=MethodKind.GEN_SIMPLE)
        self.assertAlmostEqual(v.bound, math.sqrt(10.0))
        self.assertEqual(v.order, 1)
        w = CoefficientVector(alpha=0.0, c=[0.0, 1.0], kind=MethodKind.GA_NO_BETA)
        self.assertTrue(math.isinf(w.bound))


class TestGAFreeParams(unittest.TestCase):
    def test_divergent_tail(self):
        with self.assertRaises(DomainError):
            GAFreeParams(beta=0.1, a1=0.1, b1=1.0)


class TestOrders(unittest.TestCase):
    def test_exponential_order(self):
        self.assertEqual(exponential_order(1.0), 19)
        self.assertEqual(exponential_order(3.0), ORDER_FLOOR)
        self.assertEqual(exponential_order(0.01), ORDER_CAP)

    def test_ga_order(self):
        self.assertEqual(ga_order(0.1, 0.5), 25)
        self.assertEqual(ga_order(0.1, 0.01), ORDER_FLOOR)
        self.assertEqual(ga_order(0.1, 0.98), ORDER_CAP)


class TestBuildExponentialCoeffs(unittest.TestCase):
    def test_equal_weights(self):
        v = build_exponential_coeffs(0.0, 0.0, 1)
        np.testing.assert_allclose(v.c, [0.5, 0.5])
        self.assertIs(v.kind, MethodKind.SIMPLE)

    def test_halving_weights(self):
        v = build_exponential_coeffs(0.2, math.log(2.0), 2)
        np.testing.assert_allclose(v.c, [0.8 / 1.75, 0.4 / 1.75, 0.2 / 1.75], rtol=1e-12)
        self.assertAlmostEqual(v.c[0], 0.457142857142857, places=12)
        self.assertIs(v.kind, MethodKind.GEN_EXPONENTIAL)

    def test_without_beta(self):
        v = build_exponential_coeffs(0.3, 0.5, 4, with_beta=False)
        self.assertEqual(v.c0, 0.0)
        self.assertAlmostEqual(v.alpha + v.c.sum(), 1.0, delta=1e-12)
        self.assertIs(v.kind, MethodKind.GEN_EXPONENTIAL_NO_BETA)

    def test_invalid_arguments(self):
        with self.assertRaises(DomainError):
            build_exponential_coeffs(0.1, -1.0, 3)
        with self.assertRaises(DomainError):
            build_exponential_coeffs(0.1, 1.0, 0)
        with self.assertRaises(DomainError):
            build_exponential_coeffs(1.0, 1.0, 3)

    def test_simplex_over_grid(self):
        for c in CalibrationGrids().c_grid:
            for alpha in (0.0, 0.4, 0.8):
                v = build_exponential_coeffs(alpha, c, exponential_order(c))
                self.assertAlmostEqual(v.alpha + v.c.sum(), 1.0, delta=1e-12)


class TestBuildGACoeffs(unittest.TestCase):
    def test_known_values(self):
        v = build_ga_coeffs(0.2, GAFreeParams(beta=0.1, a1=0.3, b1=0.5), 3)
        expected = np.array([0.2, 0.3, 0.15, 0.075]) * (0.8 / 0.725)
        np.testing.assert_allclose(v.c, expected, rtol=1e-12)
        self.assertAlmostEqual(v.c[0], 0.220689655172414, places=12)
        self.assertEqual(v.params, (0.1, 0.3, 0.5))

    def test_collapsed_tail(self):
        v = build_ga_coeffs(0.3, GAFreeParams(beta=0.0, a1=0.2, b1=1e-9), 5, with_beta=False)
        self.assertAlmostEqual(v.c[1], 0.7, places=7)

    def test_monotone_tail(self):
        v = build_ga_coeffs(0.1, GAFreeParams(beta=0.2, a1=0.3, b1=0.6), 20)
        self.assertTrue(np.all(np.diff(v.c[1:]) <= 0.0))

    def test_matches_exponential_without_beta(self):
        for c in CalibrationGrids().c_grid:
            for q in (10, 30, 50):
                ga = build_ga_coeffs(0.4, GAFreeParams(beta=0.0, a1=0.1, b1=math.exp(-c)), q, with_beta=False)
                ge = build_exponential_coeffs(0.4, c, q, with_beta=False)
                np.testing.assert_allclose(ga.c, ge.c, rtol=0.0, atol=1e-12)


class TestForwardTransform(unittest.TestCase):
    def test_two_point_example(self):
        v = CoefficientVector(alpha=0.0, c=[0.5, 0.5], kind=MethodKind.SIMPLE)
        result = forward_transform(ReturnSeries([1.0, 2.0]), v)
        self.assertEqual(result.w_series.size, 1)
        self.assertAlmostEqual(result.w_series[0], 2.0 / math.sqrt(2.5), places=12)
        self.assertTrue(math.isinf(result.objective))

    def test_trailing_variance_term(self):
        v = CoefficientVector(alpha=0.5, c=[0.25, 0.25], kind=MethodKind.GEN_SIMPLE)
        w = forward_transform(ReturnSeries([1.0, 2.0, 3.0]), v).w_series
        np.testing.assert_allclose(w, [2.0 / math.sqrt(1.25), 3.0 / math.sqrt(3.375)], rtol=1e-12)

    def test_bound_holds(self):
        y = _model3()
        v = build_exponential_coeffs(0.3, 0.2, 12)
        result = forward_transform(y, v)
        self.assertEqual(result.w_series.size, len(y) - 12)
        self.assertTrue(np.all(np.abs(result.w_series) < v.bound))

    def test_scale_invariance(self):
        y = _model3()
        v = build_ga_coeffs(0.2, GAFreeParams(beta=0.3, a1=0.2, b1=0.4), 10)
        base = forward_transform(y, v).w_series
        scaled = forward_transform(ReturnSeries(-7.5 * y.values), v).w_series
        np.testing.assert_allclose(-scaled, base, rtol=1e-10)

    def test_degenerate_window(self):
        v = CoefficientVector(alpha=0.0, c=[0.0, 1.0], kind=MethodKind.GA_NO_BETA)
        with self.assertRaises(DegenerateWindowError):
            forward_transform(ReturnSeries([0.0, 0.0, 1.0]), v)

    def test_too_short(self):
        with self.assertRaises(PreconditionError):
            forward_transform(ReturnSeries([1.0, 2.0]), build_exponential_coeffs(0.1, 1.0, 3))


class TestInverseTransform(unittest.TestCase):
    def _coeffs(self, kind, rng):
        alpha = float(rng.uniform(0.05, 0.9)) if kind.alpha_free else 0.0
        order = int(rng.integers(3, 20))
        if kind in (MethodKind.SIMPLE, MethodKind.GEN_SIMPLE):
            return build_exponential_coeffs(alpha, 0.0, order)
        if kind in (MethodKind.GA, MethodKind.GA_NO_BETA):
            params = GAFreeParams(
                beta=float(rng.uniform(0.05, 0.5)), a1=float(rng.uniform(0.05, 0.5)), b1=float(rng.uniform(0.1, 0.9))
            )
            return build_ga_coeffs(alpha, params, order, with_beta=kind.has_beta)
        return build_exponential_coeffs(alpha, float(rng.uniform(0.05, 2.0)), order, with_beta=kind.has_beta)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for kind in MethodKind:
            for _ in range(143):
                y = ReturnSeries(rng.standard_t(6, size=120))
                v = self._coeffs(kind, rng)
                self.assertIs(v.kind, kind)
                w = forward_transform(y, v).w_series
                rebuilt = inverse_transform(w, ReturnSeries(y.values[: v.order]), v)
                np.testing.assert_allclose(rebuilt.values, y.values, rtol=1e-8, atol=1e-10, err_msg=kind.value)

    def test_prefix_length_checked(self):
        v = build_exponential_coeffs(0.1, 1.0, 3)
        with self.assertRaises(PreconditionError):
            inverse_transform(np.array([0.1]), ReturnSeries([1.0, 2.0]), v)

    def test_out_of_bound_innovation(self):
        v = CoefficientVector(alpha=0.0, c=[0.25, 0.75], kind=MethodKind.GEN_SIMPLE)
        with self.assertRaises(DomainError):
            inverse_transform(np.array([2.0]), ReturnSeries([1.0]), v)


class TestCalibrate(unittest.TestCase):
    def setUp(self):
        self.y = _model3()
        self.grids = CalibrationGrids.fast()

    def test_generalized_exponential(self):
        result = calibrate(self.y, MethodKind.GEN_EXPONENTIAL, 0.2, self.grids)
        v = result.coeffs
        self.assertEqual(v.alpha, 0.2)
        self.assertLessEqual(v.c0, BETA_BOUND)
        self.assertAlmostEqual(v.alpha + v.c.sum(), 1.0, delta=1e-12)
        self.assertEqual(result.w_series.size, len(self.y) - v.order)
        self.assertTrue(np.all(np.abs(result.w_series) < v.bound))
        self.assertAlmostEqual(result.objective, abs(sample_kurtosis(result.w_series) - 3.0), places=10)

    def test_ga_keeps_c0_largest(self):
        v = calibrate(self.y, MethodKind.GA, 0.8, self.grids).coeffs
        self.assertLessEqual(v.c0, BETA_BOUND)
        self.assertEqual(v.c0, v.c.max())
        beta, a1, b1 = v.params
        self.assertLess(beta + a1 + b1, 1.0)

    def test_ga_infeasible_at_low_alpha(self):
        # c0 / (1 - alpha) cannot drop below 1/4 on the 0.05 grid
        with self.assertRaises(CalibrationError) as cm:
            calibrate(self.y, MethodKind.GA, 0.2, self.grids)
        self.assertIsNotNone(cm.exception.best)
        self.assertTrue(math.isfinite(cm.exception.best_objective))
        self.assertGreater(cm.exception.best.coeffs.c0, BETA_BOUND)

    def test_parsimonious(self):
        v = calibrate(self.y, MethodKind.GA_NO_BETA, 0.5, self.grids).coeffs
        self.assertEqual(v.c0, 0.0)
        self.assertIs(v.kind, MethodKind.GA_NO_BETA)

    def test_simple_pins_alpha(self):
        v = calibrate(self.y, MethodKind.SIMPLE, 0.5, self.grids).coeffs
        self.assertEqual(v.alpha, 0.0)
        self.assertLessEqual(v.c0, BETA_BOUND)
        self.assertTrue(np.allclose(v.c, v.c[0]))

    def test_deterministic(self):
        a = calibrate(self.y, MethodKind.GEN_EXPONENTIAL, 0.5, self.grids)
        b = calibrate(self.y, MethodKind.GEN_EXPONENTIAL, 0.5, self.grids)
        np.testing.assert_array_equal(a.coeffs.c, b.coeffs.c)
        self.assertEqual(a.objective, b.objective)

    def test_alpha_outside_grid(self):
        with self.assertRaises(PreconditionError):
            calibrate(self.y, MethodKind.GEN_EXPONENTIAL, 0.3, self.grids)

    def test_window_too_short(self):
        with self.assertRaises(PreconditionError):
            calibrate(ReturnSeries(self.y.values[:15]), MethodKind.GEN_EXPONENTIAL, 0.2, self.grids)


class TestCalibrationGrids(unittest.TestCase):
    def test_unit_grid(self):
        grid = CalibrationGrids().unit_grid()
        self.assertEqual(len(grid), 49)
        self.assertAlmostEqual(grid[0], 0.02)
        self.assertAlmostEqual(grid[-1], 0.98)
        self.assertEqual(len(CalibrationGrids.fast().unit_grid()), 19)

    def test_default_alpha_grid(self):
        self.assertEqual(CalibrationGrids().alpha_grid, (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8))

    def test_invalid(self):
        with self.assertRaises(PreconditionError):
            CalibrationGrids(alpha_grid=())
        with self.assertRaises(DomainError):
            CalibrationGrids(unit_grid_step=0.0)


class TestDiagnose(unittest.TestCase):
    def test_fields(self):
        result = forward_transform(_model3(), build_exponential_coeffs(0.3, 0.3, 12))
        d = diagnose(result)
        self.assertAlmostEqual(d.objective, result.objective)
        self.assertAlmostEqual(abs(d.kurtosis - 3.0), result.objective, places=10)
        for p in (d.ljung_box_pvalue, d.ljung_box_sq_pvalue):
            self.assertGreaterEqual(p, 0.0)
            self.assertLessEqual(p, 1.0)


if __name__ == "__main__":
    unittest.main()
