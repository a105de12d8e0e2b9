import math

import numpy as np
from django.test import SimpleTestCase
from scipy import special

from layer.exceptions import CoincidentPointsError, DomainError, KernelRangeError
from layer.greens import (
    KernelEvalConfig, LayerKernel, calibrate_tail_constant, chi_n, k0_cosine_sum, layer_green, omega_n,
)
from layer.specfun import Sheet, SheetContext, kappa_n, z0_kernel


def modal_green(z, x, xp, ctx, modes=200):
    """Direct sum (1/2 pi) sum_n Z0(kappa_n rho) chi_n chi_n'."""
    rho = math.hypot(x[0] - xp[0], x[1] - xp[1])
    total = 0.0
    for n in range(1, modes + 1):
        total += z0_kernel(z, n, rho, ctx) * chi_n(n, x[2]) * chi_n(n, xp[2])
    return complex(total) / (2.0 * math.pi)


class BaseTest(SimpleTestCase):
    def setUp(self):
        self.x = np.array([1.0, 0.0, 1.0])
        self.xp = np.array([1.3, 0.4, 1.6])
        self.cfg = KernelEvalConfig(n_max=41, split_k=1)
        self.first = SheetContext(1)
        self.second = SheetContext(1, Sheet.SECOND)


class CosineSumTests(BaseTest):
    """
    Tests for the closed-form K0 cosine sum
    """
    def test_against_partial_sums(self):
        """
        Test the closed form against 10^5 explicit terms.
        """
        n = np.arange(1, 100001, dtype=float)
        for rho in (0.01, 0.1, 0.5, 1.0):
            decay = special.k0(n * rho)
            for a in (0.0, 0.5, 1.0, 2.0, 3.0):
                direct = float(np.sum(decay * np.cos(n * a)))
                self.assertLess(abs(k0_cosine_sum(rho, a) - direct), 1e-8)

    def test_domain(self):
        """
        Test rho must be positive and a must lie in [0, 2 pi).
        """
        with self.assertRaises(DomainError):
            k0_cosine_sum(0.0, 1.0)
        with self.assertRaises(DomainError):
            k0_cosine_sum(0.5, 2 * math.pi)


class KernelConfigTests(BaseTest):
    """
    Tests for the truncation settings
    """
    def test_kernel_modes_default(self):
        """
        Test kernel_modes = max(k + 8, 2k + 2).
        """
        self.assertEqual(KernelEvalConfig(n_max=50, split_k=1).kernel_modes, 9)
        self.assertEqual(KernelEvalConfig(n_max=50, split_k=10).kernel_modes, 22)

    def test_n_max_from_surface(self):
        """
        Test n_max = max(k + 40, ceil(-ln(tail_tol) / r_min)).
        """
        self.assertEqual(KernelEvalConfig.for_surface(1.3, 1, tail_tol=1e-10).n_max, 41)
        self.assertEqual(KernelEvalConfig.for_surface(0.1, 1, tail_tol=1e-10).n_max, 231)
        self.assertEqual(KernelEvalConfig.for_surface(1.3, 1, n_max=60).n_max, 60)

    def test_n_max_must_cover_window(self):
        """
        Test n_max beyond the open channels.
        """
        with self.assertRaises(DomainError):
            KernelEvalConfig(n_max=2, split_k=2)


class GreenTests(BaseTest):
    """
    Tests for the layer Green's function
    """
    def test_below_spectrum(self):
        """
        Test the split kernel against the modal sum at z = -1.
        """
        value = layer_green(-1.0, self.x, self.xp, self.first, self.cfg)
        self.assertLess(abs(value - modal_green(-1.0, self.x, self.xp, self.first)), 1e-9)

    def test_first_sheet_complex(self):
        """
        Test the split kernel against the modal sum above the cut.
        """
        z = 2.5 + 0.3j
        value = layer_green(z, self.x, self.xp, self.first, self.cfg)
        self.assertLess(abs(value - modal_green(z, self.x, self.xp, self.first)), 1e-9)

    def test_second_sheet(self):
        """
        Test the continued kernel against the continued modal sum.
        """
        z = 2.5 - 0.3j
        value = layer_green(z, self.x, self.xp, self.second, self.cfg)
        self.assertLess(abs(value - modal_green(z, self.x, self.xp, self.second)), 1e-9)

    def test_symmetry(self):
        """
        Test G(x, x') = G(x', x).
        """
        for z in (-1.0, 2.5 + 0.2j, 3.0 - 0.2j):
            forward = layer_green(z, self.x, self.xp, self.second, self.cfg)
            backward = layer_green(z, self.xp, self.x, self.second, self.cfg)
            self.assertLess(abs(forward - backward), 1e-12)

    def test_edge_of_wedge(self):
        """
        Test the first-sheet kernel above the cut meets the continued one below.
        """
        cfg = KernelEvalConfig(n_max=42, split_k=2)
        above = layer_green(6.0 + 1e-8j, self.x, self.xp, SheetContext(2), cfg)
        below = layer_green(6.0 - 1e-8j, self.x, self.xp, SheetContext(2, Sheet.SECOND), cfg)
        self.assertLess(abs(above - below), 1e-6)

    def test_coincident_points(self):
        """
        Test G is refused at x = x'.
        """
        with self.assertRaises(CoincidentPointsError):
            layer_green(2.5, self.x, self.x, self.first, self.cfg)

    def test_vertical_pair(self):
        """
        Test a pair with rho = 0 joins continuously onto nearby pairs.
        """
        above = np.array([1.0, 0.0, 1.4])
        nearby = np.array([1.0 + 1e-7, 0.0, 1.4])
        for z in (-1.0, 2.5 - 0.2j):
            flat = layer_green(z, self.x, above, self.second, self.cfg)
            spread = layer_green(z, self.x, nearby, self.second, self.cfg)
            self.assertLess(abs(flat - spread), 1e-6)

    def test_kernel_range(self):
        """
        Test z too large for the explicit modes.
        """
        kernel = LayerKernel(self.x, self.xp, self.cfg)
        with self.assertRaises(KernelRangeError):
            kernel.evaluate(1000.0, self.first)

    def test_tail_constant(self):
        """
        Test the calibrated tail constant is a finite non-negative number.
        """
        constant = calibrate_tail_constant(self.cfg)
        self.assertTrue(math.isfinite(constant))
        self.assertGreaterEqual(constant, 0.0)


class ModeTests(BaseTest):
    """
    Tests for the wire modes omega_n
    """
    def test_omega_value(self):
        """
        Test omega_1 below the spectrum.
        """
        expected = special.k0(math.sqrt(2.0)) * chi_n(1, 1.0) / (2 * math.pi)
        self.assertAlmostEqual(complex(omega_n(-1.0, 1, self.x, self.first)), expected, places=14)

    def test_omega_rows(self):
        """
        Test a column of mode indices gives one row per mode.
        """
        nodes = np.array([[1.0, 0.0, 1.0], [1.2, 0.1, 2.0]])
        rows = omega_n(2.5 - 0.1j, np.arange(1, 4)[:, None], nodes, self.second)
        self.assertEqual(rows.shape, (3, 2))
        expected = z0_kernel(2.5 - 0.1j, 2, math.hypot(1.2, 0.1), self.second) * chi_n(2, 2.0) / (2 * math.pi)
        self.assertAlmostEqual(complex(rows[1, 1]), complex(expected), places=14)

    def test_omega_on_axis(self):
        """
        Test omega_n is refused on the wire.
        """
        with self.assertRaises(DomainError):
            omega_n(2.5, 1, np.array([0.0, 0.0, 1.0]), self.first)

    def test_kappa_matches(self):
        """
        Test omega_n uses the kappa_n branch.
        """
        value = complex(omega_n(-3.0, 1, self.x, self.first))
        expected = special.k0(complex(kappa_n(-3.0, 1)).real) * chi_n(1, 1.0) / (2 * math.pi)
        self.assertAlmostEqual(value, expected, places=14)

    def test_chi_values(self):
        """
        Test chi_2 vanishes at mid-layer and chi_1 peaks there at sqrt(2 / pi).
        """
        self.assertAlmostEqual(float(chi_n(2, math.pi / 2)), 0.0, places=14)
        self.assertAlmostEqual(float(chi_n(1, math.pi / 2)), 0.7978845608, places=10)

    def test_chi_orthonormal(self):
        """
        Test int_0^pi chi_n chi_m = delta_nm for n, m <= 10 on a 64-point Gauss rule.
        """
        x, w = np.polynomial.legendre.leggauss(64)
        x3, w = 0.5 * math.pi * (x + 1.0), 0.5 * math.pi * w
        modes = np.arange(1, 11)
        table = chi_n(modes[:, None], x3[None, :])
        gram = (table * w) @ table.T
        np.testing.assert_allclose(gram, np.eye(10), atol=1e-12)

    def test_omega_conjugate_symmetry(self):
        """
        Test omega_n(conj z) = conj omega_n(z) on the first sheet.
        """
        z = 2.5 + 0.3j
        for n in (1, 2, 3, 4):
            upper = complex(omega_n(z, n, self.xp, self.first))
            lower = complex(omega_n(z.conjugate(), n, self.xp, self.first))
            self.assertLess(abs(lower - upper.conjugate()), 1e-13)

    def test_omega_zero_on_nodal_plane(self):
        """
        Test omega_n vanishes where chi_n does.
        """
        for n, x3 in ((2, math.pi / 2), (3, math.pi / 3), (3, 2 * math.pi / 3)):
            value = omega_n(2.5 - 0.1j, n, np.array([1.0, 0.2, x3]), self.second)
            self.assertLess(abs(complex(value)), 1e-15)


class WallTests(BaseTest):
    """
    Tests for the kernel near the walls and near the diagonal
    """
    def test_dirichlet_walls(self):
        """
        Test G(-2; x, x') vanishes as x' approaches either wall.
        """
        for height in (1e-9, math.pi - 1e-9):
            wall = np.array([1.3, 0.4, height])
            self.assertLess(abs(layer_green(-2.0, self.x, wall, self.first, self.cfg)), 1e-8)

    def test_first_sheet_conjugate_symmetry(self):
        """
        Test G(conj z) = conj G(z) on the first sheet.
        """
        z = 2.5 + 0.3j
        upper = layer_green(z, self.x, self.xp, self.first, self.cfg)
        lower = layer_green(z.conjugate(), self.x, self.xp, self.first, self.cfg)
        self.assertLess(abs(lower - upper.conjugate()), 1e-12)

    def test_bounded_remainder(self):
        """
        Test G(-2; x, x') - 1/(4 pi |x - x'|) stays bounded along an oblique approach.
        """
        direction = np.array([0.6, 0.0, 0.8])
        remainders = []
        for t in (1e-4, 1e-5, 1e-6):
            value = layer_green(-2.0, self.x, self.x + t * direction, self.first, self.cfg)
            remainders.append(value - 1.0 / (4.0 * math.pi * t))
        for remainder in remainders:
            self.assertLess(abs(remainder), 10.0)
            self.assertLess(abs(remainder - remainders[-1]), 1e-2)

    def test_n_max_has_no_effect_on_kernel(self):
        """
        Test doubling n_max leaves the kernel unchanged.
        """
        wide = KernelEvalConfig(n_max=82, split_k=1)
        for z in (-1.0, 2.5 - 0.2j):
            narrow = layer_green(z, self.x, self.xp, self.second, self.cfg)
            self.assertLess(abs(layer_green(z, self.x, self.xp, self.second, wide) - narrow), 1e-10)
