"""Tests for slab amplitudes, gluing and transfer-operator spectra in segal.py."""

import math
import unittest

import numpy as np

import config
import segal
from numerics import InvalidInputError
from polynomial import Polynomial
from pphi2 import InteractionSpec
from segal import CapacityError, CylinderSlab, InvalidCompositionError
from tests.helpers import make_cycle, make_slab, patch_config, rng

QUARTIC = InteractionSpec(Polynomial.from_list([0.0, 0.0, 0.0, 0.0, 0.1]))


class TestRing(unittest.TestCase):
    def test_fourier_basis_diagonalizes_the_ring(self):
        for n in (1, 2, 3, 4, 5):
            basis, eigenvalues = segal.fourier_basis(n)
            np.testing.assert_allclose(basis.T @ basis, np.eye(n), atol=1e-12)
            np.testing.assert_allclose(
                basis.T @ segal.transverse_laplacian(n) @ basis, np.diag(eigenvalues), atol=1e-12
            )

    def test_local_variance_is_infinite_chain_variance(self):
        slab = make_slab(1, 0)
        self.assertAlmostEqual(segal.local_wick_variance(slab), 1.0 / math.sqrt(5.0), places=14)
        self.assertAlmostEqual(segal.local_wick_variance(slab), make_cycle(200).covariance[0, 0], places=10)
        self.assertAlmostEqual(segal.torus_wick_shift(slab, 200), 0.0, places=10)

    def test_glued_torus_needs_a_copy(self):
        with self.assertRaises(InvalidInputError):
            segal.glued_torus(make_slab(), 0)


class TestSlab(unittest.TestCase):
    def test_layout(self):
        slab = make_slab(3, 2)
        self.assertEqual(slab.n_vertices, 12)
        np.testing.assert_array_equal(slab.boundary, [0, 1, 2, 9, 10, 11])
        np.testing.assert_array_equal(slab.interior, np.arange(3, 9))

    def test_invalid_slabs(self):
        with self.assertRaises(InvalidInputError):
            CylinderSlab(0, 1)
        with self.assertRaises(InvalidInputError):
            CylinderSlab(2, 0, mass=0.0)
        with self.assertRaises(InvalidInputError):
            CylinderSlab(2, 0, interaction=InteractionSpec(QUARTIC.p, chi=np.ones(3)))

    def test_stacking_free_slabs(self):
        stacked = make_slab(2, 0).stacked(make_slab(2, 1))
        self.assertEqual(stacked.n_layers, 2)
        with self.assertRaises(InvalidCompositionError):
            make_slab(2, 0).stacked(make_slab(3, 0))
        with self.assertRaises(InvalidCompositionError):
            make_slab(2, 0).stacked(make_slab(2, 0, interaction=QUARTIC))

    def test_stacking_merges_boundary_half_weights(self):
        slab = make_slab(2, 0, interaction=QUARTIC)
        stacked = slab.stacked(slab)
        np.testing.assert_allclose(stacked.interaction.chi, np.ones(6))
        self.assertTrue(stacked.reflection_symmetric)

    def test_asymmetric_mask(self):
        spec = InteractionSpec(QUARTIC.p, chi=[1.0, 1.0, 0.0, 0.0])
        self.assertFalse(make_slab(2, 0, interaction=spec).reflection_symmetric)

    def test_wide_ring_has_no_tensor_grid(self):
        with self.assertRaises(CapacityError):
            segal.boundary_grid(make_slab(5, 0))
        self.assertTrue(segal.factorized(make_slab(5, 0)))
        self.assertFalse(segal.factorized(make_slab(4, 0)))
        self.assertFalse(segal.factorized(make_slab(5, 0, interaction=QUARTIC)))

    def test_grid_point_capacity(self):
        with patch_config(MAX_AMPLITUDE_POINTS=10):
            with self.assertRaises(CapacityError):
                segal.boundary_grid(make_slab(2, 0), order=4)


class TestFreeAmplitudes(unittest.TestCase):
    def test_adjoint(self):
        u = segal.build_amplitude(make_slab(2, 1))
        self.assertLess(segal.adjoint_check(u)["max_error"], 1e-12)

    def test_composition_matches_thicker_slab(self):
        result = segal.compose_check(make_slab(2, 0))
        self.assertLess(result["max_error"], 1e-8)
        self.assertGreaterEqual(result["max_error"], result["commutator"])

    def test_trace_is_glued_torus_determinant(self):
        result = segal.trace_check(make_slab(2, 1), 3)
        self.assertLess(result["max_error"], 1e-6)

    def test_two_decompositions_agree(self):
        result = segal.decomposition_check(make_slab(2, 0), 4, make_slab(2, 1), 2)
        self.assertLess(result["max_error"], 1e-6)
        with self.assertRaises(InvalidInputError):
            segal.decomposition_check(make_slab(2, 0), 3, make_slab(2, 1), 2)

    def test_amplitude_density(self):
        result = segal.amplitude_density_check(make_slab(2, 1), rng(20), points=200)
        self.assertLess(result["max_error"], 1e-8)
        self.assertLess(result["zero_point_error"], 1e-8)
        self.assertLess(result["bfk_error"], 1e-10)

    def test_mode_factorization(self):
        result = segal.factorization_check(make_slab(3, 1), rng(21))
        self.assertLess(result["max_error"], 1e-10)
        self.assertLess(result["trace_error"], 1e-10)
        self.assertGreaterEqual(result["max_error"], result["trace_error"])
        self.assertEqual(len(segal.mode_amplitudes(make_slab(3, 1))), 3)

    def test_composition_needs_a_common_grid(self):
        slab = make_slab(1, 0)
        with self.assertRaises(InvalidCompositionError):
            segal.compose(segal.build_amplitude(slab, order=8), segal.build_amplitude(slab, order=10))

    def test_rescaling(self):
        u = segal.build_amplitude(make_slab(1, 0))
        self.assertAlmostEqual(segal.log_trace(u.scaled(2.0), 3), segal.log_trace(u, 3) + 3.0 * math.log(2.0))
        with self.assertRaises(InvalidInputError):
            u.scaled(-1.0)
        with self.assertRaises(InvalidInputError):
            segal.log_trace(u, 0)


class TestWideFreeRing(unittest.TestCase):
    def test_trace_factorizes_over_modes(self):
        result = segal.trace_check(make_slab(6, 1), 3)
        self.assertTrue(result["factorized"])
        self.assertLess(result["max_error"], 1e-6)

    def test_composition_per_mode(self):
        result = segal.compose_check(make_slab(6, 0))
        self.assertEqual(result["modes"], 6)
        self.assertLess(result["max_error"], 1e-8)

    def test_decompositions_agree(self):
        result = segal.decomposition_check(make_slab(6, 0), 4, make_slab(6, 1), 2)
        self.assertLess(result["max_error"], 1e-6)

    def test_mode_operators_are_free_only(self):
        self.assertEqual(len(segal.mode_operators(make_slab(6, 0))), 6)
        with self.assertRaises(InvalidInputError):
            segal.mode_operators(make_slab(6, 0, interaction=QUARTIC))


class TestSpectrum(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.u = segal.build_amplitude(make_slab(1, 0))
        cls.suite = segal.spectral_suite(cls.u, n_list=(1, 2, 4, 8), k_max=10)

    def test_ground_state_is_positive(self):
        self.assertTrue(self.suite["ground_positive"])
        self.assertLess(self.suite["spectrum"]["alpha"], 1.0)

    def test_free_energy_within_bound(self):
        for row in self.suite["free_energy"]:
            self.assertLessEqual(row["error"], row["bound"] + 1e-12)

    def test_mixing_within_bound(self):
        for row in self.suite["mixing"]:
            self.assertLessEqual(row["value"], row["bound"])

    def test_gibbs_ratio_within_bound(self):
        for row in self.suite["gibbs"]:
            self.assertLessEqual(row["error"], row["bound"] + 1e-12)
        with self.assertRaises(InvalidInputError):
            segal.gibbs_ratio(self.u, np.ones(self.u.grid.size), 1, 2)


class TestInteractingSlab(unittest.TestCase):
    def test_trace_against_monte_carlo(self):
        slab = make_slab(1, 1, interaction=QUARTIC)
        result = segal.trace_check(slab, 4, rng(22), samples=50_000)
        self.assertLess(result["sigmas"], 3.0)

    def test_composition_within_quadrature_tolerance(self):
        slab = make_slab(1, 0, interaction=InteractionSpec(Polynomial.from_list([0.0, 0.0, 0.0, 0.0, 1.0])))
        result = segal.compose_check(slab)
        self.assertEqual(result["grid_points"], config.SEGAL_ORDER)
        self.assertLess(result["max_error"], 1e-3)

    def test_composition_uses_the_requested_order(self):
        result = segal.compose_check(make_slab(1, 0, interaction=QUARTIC), order=12)
        self.assertEqual(result["grid_points"], 12)

    def test_far_corners_stay_positive(self):
        slab = make_slab(1, 0, interaction=InteractionSpec(Polynomial.from_list([0.0, 0.0, 0.0, 0.0, 1.0])))
        u = segal.build_amplitude(slab, order=48)
        self.assertGreater(float(u.matrix.min()), 0.0)
        self.assertTrue(np.all(np.isfinite(u.matrix)))

    def test_free_only_helpers_reject_interaction(self):
        slab = make_slab(1, 0, interaction=QUARTIC)
        with self.assertRaises(InvalidInputError):
            segal.amplitude_kernel(slab, [0.0], [0.0])
        with self.assertRaises(InvalidInputError):
            segal.factorization_check(slab, rng(23))


if __name__ == "__main__":
    unittest.main()
