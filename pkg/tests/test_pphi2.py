"""Tests for Wick-ordered interactions on lattice fields in pphi2.py."""

import math
import unittest

import numpy as np

import lattice
import pphi2
from numerics import InvalidInputError
from polynomial import InvalidInteractionError, Polynomial
from pphi2 import InteractionSpec
from tests.helpers import make_cycle, make_torus, rng

QUARTIC = InteractionSpec(Polynomial.from_list([0.0, 0.0, 0.0, 0.0, 0.1]))


class TestInteraction(unittest.TestCase):
    def test_unbounded_polynomial_rejected(self):
        with self.assertRaises(InvalidInteractionError):
            InteractionSpec(Polynomial.from_list([0.0, 0.0, 0.0, 1.0]))
        with self.assertRaises(InvalidInteractionError):
            InteractionSpec(Polynomial.from_list([0.0, 0.0, -1.0]))

    def test_cutoff_weights(self):
        q = make_cycle(4, spacing=0.5)
        spec = InteractionSpec(QUARTIC.p, chi=[1.0, 0.0, 2.0, 1.0])
        np.testing.assert_allclose(spec.weights(q), [0.5, 0.0, 1.0, 0.5])
        with self.assertRaises(InvalidInputError):
            InteractionSpec(QUARTIC.p, chi=[1.0, -1.0])
        with self.assertRaises(InvalidInputError):
            InteractionSpec(QUARTIC.p, chi=[1.0, 1.0]).weights(q)

    def test_tadpole_is_green_diagonal(self):
        q = make_torus(5, 5)
        np.testing.assert_allclose(pphi2.tadpole(q).values, np.diag(q.covariance))


class TestActionStatistics(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.q = make_torus(6, 6)
        cls.actions = pphi2.sample_actions(QUARTIC, cls.q, 100_000, rng(10))

    def test_wick_action_has_mean_zero(self):
        stderr = math.sqrt(pphi2.action_variance(QUARTIC, self.q) / self.actions.size)
        self.assertLess(abs(self.actions.mean()), 5.0 * stderr)

    def test_variance_formula(self):
        exact = pphi2.action_variance(QUARTIC, self.q)
        self.assertAlmostEqual(self.actions.var(ddof=1) / exact, 1.0, delta=0.1)

    def test_lower_bound_holds_for_every_sample(self):
        self.assertGreaterEqual(self.actions.min(), pphi2.action_lower_bound(QUARTIC, self.q))

    def test_variance_needs_pure_even_power(self):
        spec = InteractionSpec(Polynomial.from_list([0.0, 0.0, 1.0, 0.0, 1.0]))
        with self.assertRaises(InvalidInputError):
            pphi2.action_variance(spec, self.q)
        self.assertGreater(pphi2.polynomial_action_variance(spec, self.q), 0.0)

    def test_single_field_returns_float(self):
        self.assertIsInstance(pphi2.wick_action(QUARTIC, self.q, np.zeros(self.q.n)), float)
        with self.assertRaises(InvalidInputError):
            pphi2.wick_action(QUARTIC, self.q, np.zeros(3))


class TestPartitionFunction(unittest.TestCase):
    def test_monte_carlo_matches_quadratic_formula(self):
        q = make_cycle(6)
        spec = InteractionSpec(Polynomial.from_list([0.2, 0.3, 0.5]))
        exact = pphi2.quadratic_partition(spec, q)
        mc, stderr = pphi2.partition_mc(spec, q, 200_000, rng(11))
        self.assertLess(abs(mc - exact), 5.0 * stderr)

    def test_quadratic_formula_needs_low_degree(self):
        with self.assertRaises(InvalidInputError):
            pphi2.quadratic_partition(QUARTIC, make_cycle(4))

    def test_constant_interaction(self):
        q = make_cycle(5)
        spec = InteractionSpec(Polynomial.from_list([0.4]))
        self.assertAlmostEqual(pphi2.quadratic_partition(spec, q), math.exp(-2.0), places=12)

    def test_change_of_reference_variance(self):
        spec = InteractionSpec(Polynomial.from_list([1.0, 0.0, -2.0, 0.0, 0.5]))
        moved = pphi2.change_reference(spec, 0.3)
        x = np.linspace(-3.0, 3.0, 25)
        np.testing.assert_allclose(
            pphi2.wick_order(spec.p, 0.2)(x), pphi2.wick_order(moved.p, 0.5)(x), atol=1e-10
        )


class TestRenormalization(unittest.TestCase):
    def test_tadpole_grows_logarithmically(self):
        result = pphi2.tadpole_regression()
        self.assertTrue(result["ok"])
        self.assertGreater(result["r2"], 0.99)
        self.assertEqual([r["n"] for r in result["rows"]], [8, 16, 32, 64])


class TestLocality(unittest.TestCase):
    def test_decoupling_across_two_rows(self):
        q = make_torus(6, 6)
        sigma = np.concatenate([q.graph.torus_row(0), q.graph.torus_row(3)])
        result = pphi2.decouple_check(q, sigma, QUARTIC, rng(12), samples=50)
        self.assertLess(result["max_error"], 1e-10)
        self.assertTrue(result["locality_bit_identical"])
        self.assertTrue(result["ok"])
        self.assertEqual(result["regions"], 2)

    def test_non_dissecting_sigma_rejected(self):
        q = make_torus(6, 6)
        with self.assertRaises(InvalidInputError):
            pphi2.decouple_check(q, q.graph.torus_row(0), QUARTIC, rng(12))


class TestMollifiers(unittest.TestCase):
    def test_shapes_and_limits(self):
        q = make_torus(6, 6)
        box, heat = pphi2.mollifiers(q, 1.0)
        np.testing.assert_allclose(box.sum(axis=1), 1.0)
        np.testing.assert_allclose(heat.sum(axis=1), 1.0)
        with self.assertRaises(InvalidInputError):
            pphi2.mollifiers(q, 3.0)
        with self.assertRaises(InvalidInputError):
            pphi2.mollifiers(make_cycle(6), 1.0)

    def test_zero_radius_mollifiers_coincide(self):
        q = make_torus(4, 4)
        box, heat = pphi2.mollifiers(q, 0.1)
        np.testing.assert_allclose(box, np.eye(16))
        self.assertLess(pphi2.mollifier_distance(QUARTIC, q, box, heat), 1e-6)

    def test_monte_carlo_distance(self):
        q = make_torus(6, 6)
        spec = InteractionSpec(Polynomial.from_list([0.0, 0.0, 1.0]))
        rows = pphi2.mollifier_compare(q, spec, [1.0, 2.0], rng(13), samples=20_000)
        self.assertEqual(len(rows), 2)
        self.assertIn("monotone", rows[1])
        for row in rows:
            self.assertGreater(row["exact"], 0.0)
            self.assertAlmostEqual(row["mc"] / row["exact"], 1.0, delta=0.1)


class TestWickCovarianceTable(unittest.TestCase):
    def test_diagonal_only(self):
        table = pphi2.wick_cov_table(1.0, 0.5, n_max=3)
        self.assertEqual(len(table), 16)
        for row in table:
            if row["n"] != row["m"]:
                self.assertEqual(row["value"], 0.0)
        self.assertIn({"n": 2, "m": 2, "value": 0.5}, table)


class TestMarkovSplitIsUsed(unittest.TestCase):
    def test_split_reassembles_field(self):
        q = make_torus(6, 6)
        sigma = q.graph.torus_row(0)
        phi = lattice.sample(q, 4, rng(14))
        harmonic, dirichlet = lattice.markov_decompose(q, sigma).split(phi)
        self.assertAlmostEqual(
            float(np.abs(pphi2.wick_action(QUARTIC, q, harmonic + dirichlet) - pphi2.wick_action(QUARTIC, q, phi)).max()),
            0.0,
            places=10,
        )


if __name__ == "__main__":
    unittest.main()
