"""Tests for zeta continuation, Fredholm determinants and the cylinder DN map."""

import math
import unittest
import warnings
from unittest import mock

import numpy as np

import zeta
from numerics import InvalidInputError
from zeta import AccuracyError, NotTraceClassError, ZetaResult
from tests.helpers import random_spd

TWO_PI = 2.0 * math.pi


class TestContinuation(unittest.TestCase):
    def test_harmonic_family_gives_log_two_pi(self):
        result = zeta.zeta_continue(zeta.harmonic_family())
        self.assertAlmostEqual(result.zeta0, -0.5, places=14)
        self.assertAlmostEqual(result.logdet, math.log(TWO_PI), places=8)

    def test_harmonic_family_at_one_is_basel_sum(self):
        self.assertAlmostEqual(zeta.zeta_at(zeta.harmonic_family(), 1.0), math.pi**2 / 6.0, places=8)

    def test_poles_and_bad_arguments(self):
        with self.assertRaises(InvalidInputError):
            zeta.zeta_at(zeta.harmonic_family(), 0.5)
        with self.assertRaises(InvalidInputError):
            zeta.zeta_at(zeta.harmonic_family(), -1.0)
        with self.assertRaises(InvalidInputError):
            zeta.circle_family(0.0, 1.0)

    def test_finite_family_is_ordinary_determinant(self):
        eigenvalues = [0.5, 2.0, 7.0]
        result = zeta.zeta_continue(zeta.finite_family(eigenvalues, [1.0, 2.0, 1.0]))
        self.assertAlmostEqual(result.zeta0, 4.0)
        self.assertAlmostEqual(result.logdet, math.log(0.5) + 2.0 * math.log(2.0) + math.log(7.0), places=10)
        with self.assertRaises(InvalidInputError):
            zeta.finite_family([1.0, -1.0])

    def test_split_point_does_not_matter(self):
        self.assertLess(zeta.t_split_check(zeta.circle_family(1.0, TWO_PI))["max_error"], 1e-7)
        self.assertLess(zeta.t_split_check(zeta.torus_family(1.0, TWO_PI, 1.0))["max_error"], 1e-7)

    def test_heat_trace_matches_expansion_plus_remainder(self):
        fam = zeta.dirichlet_cylinder_family(1.0, TWO_PI, 1.0)
        t = 0.05
        expansion = sum(c * t**p for p, c in fam.expansion)
        self.assertAlmostEqual(fam.heat_trace(t), expansion + float(fam.remainder(np.array([t]))[0]), places=8)

    def test_square_root_families_expand_exactly(self):
        t = 0.05
        for fam in (zeta.sqrt_circle_family(1.0, TWO_PI), zeta.sqrt_circle_family(0.5, 3.0, 2.0),
                    zeta.jumpy_dn_family(1.0, TWO_PI, 1.0)):
            expansion = sum(c * t**p for p, c in fam.expansion)
            self.assertAlmostEqual(fam.heat_trace(t), expansion + float(fam.remainder(np.array([t]))[0]), places=8)

    def test_heat_constant_term_reads_zeta_at_zero(self):
        self.assertAlmostEqual(zeta.heat_constant_term(zeta.harmonic_family()), -0.5, delta=1e-8)
        self.assertLess(abs(zeta.heat_constant_term(zeta.sqrt_circle_family(1.0, TWO_PI))), 1e-6)

    def test_zeta_zero_of_torus_is_minus_mass_times_area(self):
        result = zeta.zeta_continue(zeta.torus_family(1.5, 2.0, 3.0))
        self.assertAlmostEqual(result.zeta0, -(1.5**2) * 6.0 / (4.0 * math.pi), places=12)


class TestCircle(unittest.TestCase):
    def test_circle_determinant_closed_form(self):
        for mass, length in ((1.0, TWO_PI), (0.5, 3.0), (2.0, 10.0)):
            result = zeta.detzeta_circle(mass, length)
            self.assertAlmostEqual(result.logdet, zeta.circle_closed_form(mass, length), delta=1e-6)

    def test_closed_form_for_large_circles(self):
        self.assertTrue(math.isfinite(zeta.circle_closed_form(1.0, 2000.0)))

    def test_square_root_has_zero_zeta_at_zero(self):
        check = zeta.circle_check(1.0, TWO_PI)
        self.assertLess(abs(check["zeta0_sqrt"]), 1e-6)
        self.assertLess(check["two_d_vs_d"], 1e-6)
        self.assertLess(check["d_vs_power"], 1e-6)
        self.assertLess(check["max_error"], 1e-6)

    def test_square_root_determinant_ignores_scale(self):
        for mass, length in ((1.0, TWO_PI), (0.5, 3.0)):
            expected = math.log(2.0 * math.sinh(0.5 * mass * length))
            for scale in (1.0, 2.0):
                result = zeta.zeta_continue(zeta.sqrt_circle_family(mass, length, scale))
                self.assertEqual(result.zeta0, 0.0)
                self.assertAlmostEqual(result.logdet, expected, delta=1e-7)

    def test_scaling_and_powers(self):
        base = ZetaResult(zeta0=2.0, zeta_prime0=-1.0)
        self.assertAlmostEqual(zeta.scaled(base, 3.0).logdet, 1.0 + 2.0 * math.log(3.0))
        self.assertAlmostEqual(zeta.power(base, 0.5).logdet, 0.5)
        with self.assertRaises(InvalidInputError):
            zeta.scaled(base, 0.0)

    def test_relative_zeta(self):
        base = ZetaResult(zeta0=0.0, zeta_prime0=-1.0)
        moved = zeta.relative_zeta(base, [2.0, 3.0], [1.0, 3.0])
        self.assertAlmostEqual(moved.logdet, 1.0 + math.log(2.0))
        with self.assertRaises(InvalidInputError):
            zeta.relative_zeta(base, [1.0], [1.0, 2.0])


class TestFredholm(unittest.TestCase):
    def test_three_routes_agree(self):
        a = 0.1 * random_spd(6, shift=0.0)
        values = np.linalg.eigvalsh(a)
        traces = [float(np.trace(np.linalg.matrix_power(a, n))) for n in range(1, 7)]
        via_values = zeta.fredholm_det(values, 0.7)
        self.assertAlmostEqual(zeta.fredholm_det(a, 0.7), via_values, places=12)
        self.assertAlmostEqual(zeta.fredholm_det_series(traces, 0.7), via_values, places=10)

    def test_callable_family(self):
        det = zeta.fredholm_det(lambda k: 2.0 ** -(k + 1))
        expected = math.prod(1.0 + 2.0 ** -(k + 1) for k in range(60))
        self.assertAlmostEqual(det, expected, places=12)

    def test_not_trace_class(self):
        with self.assertRaises(NotTraceClassError):
            zeta.fredholm_det(lambda k: 1.0 / (k + 1))
        with self.assertRaises(NotTraceClassError):
            zeta.fredholm_det([1.0, float("inf")])

    def test_matrix_shape(self):
        with self.assertRaises(InvalidInputError):
            zeta.fredholm_det_matrix(np.zeros((2, 3)))

    def test_commutation(self):
        a = np.arange(6.0).reshape(2, 3) / 10.0
        b = np.arange(6.0).reshape(3, 2) / 10.0
        self.assertLess(zeta.commutation_check(a, b)["max_error"], 1e-12)

    def test_continuity_bound(self):
        self.assertTrue(zeta.fredholm_continuity_check([0.1, 0.2, -0.05], [0.1, 0.25, 0.0])["ok"])


class TestCylinderDN(unittest.TestCase):
    def test_mode_matrix_is_dirichlet_energy(self):
        dn = zeta.dn_cylinder(1.0, TWO_PI, 1.0)
        for k in (0, 1, 3):
            self.assertLess(dn.energy_check(k, 0.7, -0.3)["max_error"], 1e-10)

    def test_jumpy_dn_is_close_to_twice_the_square_root(self):
        dn = zeta.dn_cylinder(1.0, TWO_PI, 1.0)
        w, jumpy = dn.modes()
        np.testing.assert_allclose(jumpy, 2.0 * w * np.tanh(0.5 * w))
        self.assertTrue(np.all(jumpy <= 2.0 * w))
        self.assertLess(dn.trace_class_sum(), float(np.sum(2.0 * w)))

    def test_jumpy_eigenvalue_is_a_two_sided_dn(self):
        mode = zeta.dn_cylinder(1.0, TWO_PI, 2.0).mode(2)
        # gluing the two ends: DN of the closed cylinder on a single circle
        self.assertAlmostEqual(float(np.ones(2) @ mode.matrix @ np.ones(2)), mode.jumpy, places=12)

    def test_invalid_cylinder(self):
        with self.assertRaises(InvalidInputError):
            zeta.dn_cylinder(1.0, TWO_PI, 0.0)


class TestDeterminantIdentities(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.bfk = zeta.bfk_torus_check(1.0, TWO_PI, 1.0)

    def test_bfk_constant_is_one(self):
        self.assertLess(self.bfk["max_error"], 1e-4)

    def test_per_mode_ratio_is_two(self):
        self.assertLess(self.bfk["per_mode_ratio_error"], 1e-12)
        self.assertGreaterEqual(self.bfk["max_error"], self.bfk["per_mode_ratio_error"])

    def test_square_root_family_has_no_zero_mode_term(self):
        self.assertLess(abs(self.bfk["zeta_omega0"]), 1e-6)
        self.assertAlmostEqual(self.bfk["per_mode_difference"], self.bfk["continued_difference"], delta=1e-4)

    def test_rn_identity(self):
        self.assertLess(zeta.rn_det_identity(1.0, TWO_PI, 1.0)["max_error"], 1e-5)

    def test_dn_continuation_matches_fredholm_product(self):
        rn = zeta.rn_det_identity(1.0, TWO_PI, 1.0)
        self.assertAlmostEqual(rn["logdet_2d"], math.log(2.0 * math.sinh(math.pi)), delta=1e-7)
        self.assertAlmostEqual(rn["logdet_dn"], self.bfk["logdet_dn"], places=12)
        self.assertLess(self.bfk["dn_gap"], 1e-5)

    def test_corrupted_dn_modes_break_both_identities(self):
        original = zeta.CylinderDN.modes

        def corrupted(dn, cutoff=None):
            w, jumpy = original(dn, cutoff)
            return w, jumpy * (1.0 + 0.5 * np.exp(-np.abs(w)))

        with mock.patch.object(zeta.CylinderDN, "modes", corrupted):
            self.assertGreater(zeta.rn_det_identity(1.0, TWO_PI, 1.0)["max_error"], 1e-3)
            self.assertGreater(zeta.bfk_torus_check(1.0, TWO_PI, 1.0)["max_error"], 1e-3)

    def test_divergent_remainder_fails_loudly(self):
        fam = zeta.EigenvalueFamily(
            "divergent", lambda cutoff: (np.ones(1), np.ones(1)), ((0.0, 1.0),), lambda t: 1.0 / np.asarray(t)
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with self.assertRaises(AccuracyError):
                zeta.zeta_continue(fam)


if __name__ == "__main__":
    unittest.main()
