"""Tests for novas.series module."""

import math
import unittest

import numpy as np

from novas.errors import DegenerateDataError, DomainError, PreconditionError
from novas.series import (
    PriceSeries,
    ReturnSeries,
    rolling_windows,
    sample_kurtosis,
    to_log_returns,
    trailing_stats,
    trailing_variances,
)


class TestPriceSeries(unittest.TestCase):
    def test_nonpositive_price_reports_index(self):
        with self.assertRaises(DomainError) as cm:
            PriceSeries([100.0, 101.0, 0.0, 99.0])
        self.assertEqual(cm.exception.index, 2)

    def test_too_short(self):
        with self.assertRaises(PreconditionError):
            PriceSeries([100.0])

    def test_label_length_must_match(self):
        with self.assertRaises(PreconditionError):
            PriceSeries([1.0, 2.0], labels=("a",))

    def test_values_are_read_only(self):
        prices = PriceSeries([1.0, 2.0])
        with self.assertRaises(ValueError):
            prices.values[0] = 3.0


class TestToLogReturns(unittest.TestCase):
    def test_constant_prices(self):
        np.testing.assert_array_equal(to_log_returns(PriceSeries([1.0, 1.0, 1.0])).values, [0.0, 0.0])

    def test_exact_two_percent(self):
        returns = to_log_returns(PriceSeries([100.0, 100.0 * math.exp(0.02)]))
        self.assertAlmostEqual(returns.values[0], 2.0, places=12)

    def test_known_values(self):
        returns = to_log_returns(PriceSeries([100.0, 101.0, 99.0]))
        self.assertEqual(len(returns), 2)
        self.assertAlmostEqual(returns.values[0], 0.9950330853168, places=10)
        self.assertAlmostEqual(returns.values[1], -2.0000666706669, places=10)

    def test_accepts_plain_sequence(self):
        self.assertEqual(len(to_log_returns([1.0, 2.0, 4.0])), 2)

    def test_price_reconstruction(self):
        rng = np.random.default_rng(3)
        prices = 50.0 * np.exp(np.cumsum(rng.normal(0.0, 0.01, 200)))
        returns = to_log_returns(PriceSeries(prices))
        rebuilt = prices[0] * np.exp(np.concatenate(([0.0], np.cumsum(returns.values / 100.0))))
        np.testing.assert_allclose(rebuilt, prices, rtol=1e-12)


class TestReturnSeries(unittest.TestCase):
    def test_nonfinite_reports_index(self):
        with self.assertRaises(DomainError) as cm:
            ReturnSeries([0.1, float("nan")])
        self.assertEqual(cm.exception.index, 1)

    def test_squared(self):
        np.testing.assert_array_equal(ReturnSeries([1.0, -2.0]).squared(), [1.0, 4.0])


class TestTrailingStats(unittest.TestCase):
    def test_constant_series(self):
        self.assertEqual(trailing_stats(ReturnSeries([2.0] * 5), 5).s_sq, 0.0)

    def test_population_divisor(self):
        stats = trailing_stats(ReturnSeries([1.0, -1.0, 1.0]), 4)
        self.assertAlmostEqual(stats.mu, 1.0 / 3.0)
        self.assertAlmostEqual(stats.s_sq, 8.0 / 9.0)

    def test_single_prefix_point(self):
        self.assertEqual(trailing_stats(ReturnSeries([3.0, 1.0]), 2).s_sq, 0.0)

    def test_empty_prefix(self):
        with self.assertRaises(PreconditionError):
            trailing_stats(ReturnSeries([1.0, 2.0]), 1)

    def test_expanding_variances(self):
        np.testing.assert_allclose(trailing_variances(np.array([1.0, 2.0, 3.0])), [0.0, 0.25, 2.0 / 3.0])


class TestSampleKurtosis(unittest.TestCase):
    def test_alternating_signs(self):
        self.assertAlmostEqual(sample_kurtosis([1.0, -1.0] * 10), 1.0)

    def test_normal_draws(self):
        rng = np.random.default_rng(0)
        self.assertAlmostEqual(sample_kurtosis(rng.standard_normal(1_000_000)), 3.0, delta=0.05)

    def test_constant_input(self):
        with self.assertRaises(DegenerateDataError):
            sample_kurtosis([1.0] * 6)

    def test_too_few_points(self):
        with self.assertRaises(PreconditionError):
            sample_kurtosis([1.0, 2.0, 3.0])


class TestRollingWindows(unittest.TestCase):
    def test_count_and_first_target(self):
        pairs = list(rolling_windows(ReturnSeries(np.arange(500.0)), 250))
        self.assertEqual(len(pairs), 250)
        window, target = pairs[0]
        self.assertEqual(target, 251)
        np.testing.assert_array_equal(window.values, np.arange(250.0))
        self.assertEqual(pairs[-1][1], 500)

    def test_smallest_case(self):
        pairs = list(rolling_windows(ReturnSeries([1.0, 2.0, 3.0]), 2))
        self.assertEqual(len(pairs), 1)
        np.testing.assert_array_equal(pairs[0][0].values, [1.0, 2.0])
        self.assertEqual(pairs[0][1], 3)

    def test_count_is_length_minus_width(self):
        self.assertEqual(sum(1 for _ in rolling_windows(ReturnSeries(np.zeros(250)), 100)), 150)

    def test_width_too_large(self):
        with self.assertRaises(PreconditionError):
            list(rolling_windows(ReturnSeries([1.0, 2.0]), 2))

    def test_width_checked_at_call(self):
        with self.assertRaises(PreconditionError):
            rolling_windows(ReturnSeries([1.0, 2.0, 3.0]), 0)
        with self.assertRaises(PreconditionError):
            rolling_windows(ReturnSeries([1.0, 2.0, 3.0]), 3)


if __name__ == "__main__":
    unittest.main()
