"""Tests for Hermite polynomials, Wick powers and pairing sums."""

import math
import unittest

import numpy as np

import wick
from numerics import InvalidInputError
from polynomial import Polynomial
from tests.helpers import rng


class TestHermite(unittest.TestCase):
    def test_low_orders(self):
        x = np.linspace(-2.0, 2.0, 9)
        np.testing.assert_allclose(wick.hermite(3, x), x**3 - 3.0 * x)
        self.assertEqual(wick.hermite(4, 2.0), -5.0)
        self.assertEqual(wick.hermite(0, 7.0), 1.0)

    def test_negative_order_rejected(self):
        with self.assertRaises(InvalidInputError):
            wick.hermite(-1, 0.0)

    def test_zero_variance_gives_monomials(self):
        x = np.array([0.5, -1.5, 2.0])
        powers = wick.wick_monomials(5, x, 0.0)
        for k in range(6):
            np.testing.assert_allclose(powers[k], x**k)

    def test_wick_power_coefficients(self):
        self.assertEqual(wick.wick_power(4, 2.0).expanded.to_list(), [12.0, 0.0, -12.0, 0.0, 1.0])

    def test_wick_order_of_polynomial(self):
        ordered = wick.wick_order(Polynomial.from_list([1.0, 0.0, 3.0]), 2.0)
        self.assertEqual(ordered.expanded.to_list(), [-5.0, 0.0, 3.0])
        self.assertAlmostEqual(ordered.minimum(), -5.0)

    def test_lower_bounds(self):
        self.assertAlmostEqual(wick.hermite_lower_bound(2), 1.0, places=12)
        self.assertAlmostEqual(wick.hermite_lower_bound(4), 6.0, places=10)
        with self.assertRaises(InvalidInputError):
            wick.hermite_lower_bound(3)

    def test_generating_function(self):
        x, z = np.meshgrid(np.linspace(-2.0, 2.0, 21), np.linspace(-1.0, 1.0, 11))
        self.assertLess(wick.generating_function_error(x, z), 1e-10)

    def test_wick_evaluate_per_vertex_variance(self):
        p = Polynomial.from_list([0.0, 0.0, 1.0])
        values = wick.wick_evaluate(p, [1.0, 2.0], np.array([[3.0, 3.0]]))
        np.testing.assert_allclose(values, [[8.0, 7.0]])
        with self.assertRaises(InvalidInputError):
            wick.wick_evaluate(p, [1.0], np.zeros(2))


class TestPairings(unittest.TestCase):
    def test_matching_counts(self):
        self.assertEqual(wick.matching_count(6), 15)
        self.assertEqual(wick.matching_count(5), 0)
        self.assertEqual(len(list(wick.all_matchings(4))), 3)
        self.assertEqual(list(wick.all_matchings(3)), [])

    def test_enumeration_limit(self):
        with self.assertRaises(InvalidInputError):
            list(wick.all_matchings(18))

    def test_bad_diagram(self):
        with self.assertRaises(InvalidInputError):
            wick.PairingDiagram(4, ((0, 1), (1, 2)))

    def test_isserlis_fourth_moments(self):
        cov = np.array([[2.0, 0.5, 0.3, 0.1], [0.5, 1.0, 0.2, 0.4], [0.3, 0.2, 1.5, 0.6], [0.1, 0.4, 0.6, 1.2]])
        self.assertAlmostEqual(wick.isserlis(cov, [0, 0, 0, 0]), 12.0)
        expected = 0.5 * 0.6 + 0.3 * 0.4 + 0.1 * 0.2
        self.assertAlmostEqual(wick.isserlis(cov, [0, 1, 2, 3]), expected)
        self.assertEqual(wick.isserlis(cov, [0, 1, 2]), 0.0)

    def test_isserlis_against_sampling(self):
        cov = np.array([[1.0, 0.6], [0.6, 2.0]])
        x = rng(7).generator().multivariate_normal(np.zeros(2), cov, size=400_000)
        mc = np.mean(x[:, 0] ** 2 * x[:, 1] ** 2)
        self.assertAlmostEqual(mc, wick.isserlis(cov, [0, 0, 1, 1]), delta=0.06)

    def test_diagram_classes(self):
        classes = wick.diagram_classes([0, 0, 1, 1])
        self.assertEqual(classes, {((0, 0), (1, 1)): 1, ((0, 1), (0, 1)): 2})


class TestWickCovariance(unittest.TestCase):
    def test_orthogonality(self):
        self.assertEqual(wick.wick_cov(2, 3, 0.5, 1.0, 1.0), 0.0)
        self.assertAlmostEqual(wick.wick_cov(3, 3, 0.5, 1.0, 1.0), 6.0 * 0.125)

    def test_covariance_outside_cauchy_schwarz(self):
        with self.assertRaises(InvalidInputError):
            wick.wick_cov(2, 2, 2.0, 1.0, 1.0)

    def test_monte_carlo_agrees(self):
        exact = wick.wick_cov(2, 2, 0.7, 1.0, 2.0)
        mc, stderr = wick.wick_cov_mc(2, 2, 0.7, 1.0, 2.0, 400_000, rng(8))
        self.assertLess(abs(mc - exact), 5.0 * stderr)

    def test_hypercontractivity(self):
        result = wick.hypercontractivity_check(3, 4.0, 100_000, rng(9))
        self.assertTrue(result["ok"])
        with self.assertRaises(InvalidInputError):
            wick.hypercontractivity_check(3, 1.5, 10, rng(9))


class TestReordering(unittest.TestCase):
    def test_change_is_exact_pointwise(self):
        c1, c2 = 0.4, 1.3
        table = wick.change_ordering(5, c2 - c1)
        x = np.linspace(-3.0, 3.0, 13)
        direct = wick.wick_monomials(5, x, c1)[5]
        via = sum(t * p for t, p in zip(table, wick.wick_monomials(5, x, c2)))
        np.testing.assert_allclose(via, direct, atol=1e-10)

    def test_compose(self):
        self.assertLess(wick.compose_orderings(6, 0.3, -0.8)["max_error"], 1e-12)

    def test_reorder_zero_delta_is_identity(self):
        b = [1.0, -2.0, 0.5, 0.0, 3.0]
        np.testing.assert_allclose(wick.reorder(b, 0.0), b)

    def test_quadratic_shift(self):
        # :x^2:_c1 = :x^2:_c2 + (c2 - c1)
        np.testing.assert_allclose(wick.change_ordering(2, 0.7), [0.7, 0.0, 1.0])
        self.assertTrue(math.isclose(wick.reorder([0.0, 0.0, 1.0], 0.7)[0], 0.7))


if __name__ == "__main__":
    unittest.main()
