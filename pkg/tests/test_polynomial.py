"""Tests for interaction polynomials in polynomial.py."""

import unittest

import numpy as np

from polynomial import InvalidInteractionError, Polynomial


class TestPolynomial(unittest.TestCase):
    def test_trailing_zeros_trimmed(self):
        p = Polynomial.from_list([1.0, 2.0, 0.0, 0.0])
        self.assertEqual(p.degree, 1)
        self.assertEqual(p.to_list(), [1.0, 2.0])

    def test_bounded_below(self):
        self.assertTrue(Polynomial.from_list([0.0, 0.0, 1.0]).bounded_below)
        self.assertTrue(Polynomial.from_list([3.0]).bounded_below)
        self.assertFalse(Polynomial.from_list([0.0, 0.0, 0.0, 1.0]).bounded_below)
        self.assertFalse(Polynomial.from_list([0.0, 0.0, -1.0]).bounded_below)
        with self.assertRaises(InvalidInteractionError):
            Polynomial.from_list([0.0, 1.0]).require_bounded_below()

    def test_interaction_rejects_unbounded_at_construction(self):
        with self.assertRaises(InvalidInteractionError):
            Polynomial.interaction([0.0, 0.0, 0.0, 1.0])
        with self.assertRaises(InvalidInteractionError):
            Polynomial.interaction([0.0, 0.0, -1.0])
        p = Polynomial.interaction([0.0, 0.0, 1.0])
        self.assertEqual(p.to_list(), [0.0, 0.0, 1.0])
        # Wick expansions still build odd polynomials
        self.assertEqual(Polynomial.from_list([0.0, 1.0]).degree, 1)

    def test_minimum_of_double_well(self):
        # x^4 - 2 x^2 has minima -1 at x = +-1
        p = Polynomial.from_list([0.0, 0.0, -2.0, 0.0, 1.0])
        self.assertAlmostEqual(p.minimum(), -1.0, places=12)

    def test_minimum_of_shifted_parabola(self):
        p = Polynomial.from_list([3.0, -2.0, 1.0])
        self.assertAlmostEqual(p.minimum(), 2.0, places=12)

    def test_evaluation_and_arithmetic(self):
        p = Polynomial.from_list([1.0, 0.0, 2.0])
        q = Polynomial.monomial(1, 3.0)
        x = np.array([0.0, 1.0, -2.0])
        np.testing.assert_allclose((p + q)(x), p(x) + q(x))
        np.testing.assert_allclose(p.scaled(2.0)(x), 2.0 * p(x))
        self.assertEqual(p.derivative().to_list(), [0.0, 4.0])

    def test_pure_power(self):
        self.assertEqual(Polynomial.monomial(4, 0.5).pure_power(), (4, 0.5))
        self.assertIsNone(Polynomial.from_list([1.0, 0.0, 1.0]).pure_power())


if __name__ == "__main__":
    unittest.main()
