import os
import sys
import unittest

import numpy as np

# Add verifier directory to path so we can import app modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app import create_app
from app.config import TestingConfig
from app.middleware.error_handler import ConfigurationError, UnsupportedAmbientError
from app.models import ExampleSpec, GapVerdict
from app.services.field_service import (
    atlas_volumes, build_grid, codazzi_residual, derivative_fields, field_report, gap_thresholds, gap_verdict,
    integrate, laplace_beltrami, maslov_conformal_defect, simons_bracket, simons_diagnostic, stencil_weights
)
from app.services.gallery_service import make_immersion
from app.utils.cache import clear_cache


def build(name, **params):
    return make_immersion(ExampleSpec(name, params))


def perturbed_torus(lagrangian=True):
    return make_immersion(ExampleSpec('perturbed', {
        'base': {'name': 'flat-torus', 'radii': [1.0, 1.0]}, 'amplitude': 0.05, 'seed': 2,
        'lagrangian': lagrangian}))


def perturbed_whitney():
    return make_immersion(ExampleSpec('perturbed', {
        'base': {'name': 'whitney-cn', 'n': 2, 'r': 1.0}, 'amplitude': 0.05, 'seed': 2}))


class TestFlatTorusField(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        clear_cache()
        self.imap = build('flat-torus', radii=[1.0, 1.0])
        self.grid = build_grid(self.imap, 32)

    def test_grid_layout(self):
        self.assertEqual(self.grid.shape, (32, 32))
        self.assertEqual(self.grid.periodic, (True, True))
        self.assertAlmostEqual(integrate(self.grid, 1.0), 4 * np.pi ** 2, places=10)

    def test_gap_verdict_is_violated(self):
        report = field_report(self.imap, self.grid)
        self.assertEqual(report.gap.verdict, GapVerdict.GAP_VIOLATED)
        self.assertAlmostEqual(report.gap.ratio, 3.0, delta=1e-6)
        self.assertLess(report.gap.threshold_equivalence, 1e-12)
        self.assertAlmostEqual(report.stats['B_norm2']['sup'], 0.5, delta=1e-8)

    def test_simons_margin(self):
        margin = simons_diagnostic(self.imap, self.imap.target, self.grid)
        self.assertAlmostEqual(margin, 0.5, delta=1e-6)

    def test_laplacian_integrates_to_zero(self):
        lap = laplace_beltrami(self.grid, self.grid.pointwise.invariants.B_norm2)
        self.assertLess(abs(integrate(self.grid, lap)), 1e-6 * integrate(self.grid, 1.0))

    def test_laplacian_of_a_mode(self):
        grid = build_grid(self.imap, 64)
        f = np.cos(grid.points[..., 0])
        coarse_error = np.max(np.abs(laplace_beltrami(grid, f) + f))
        self.assertLess(coarse_error, 1e-3)
        fine = build_grid(self.imap, 128)
        g = np.cos(fine.points[..., 0])
        fine_error = np.max(np.abs(laplace_beltrami(fine, g) + g))
        self.assertGreater(coarse_error / fine_error, 3.0)
        with self.assertRaises(ConfigurationError):
            laplace_beltrami(grid, np.zeros((3, 3)))

    def test_maslov_and_codazzi(self):
        maslov = maslov_conformal_defect(self.imap, self.imap.target, self.grid)
        self.assertLess(maslov.sup_defect, 1e-8)
        self.assertLess(maslov.equivalence_residual, 1e-8)
        self.assertLess(codazzi_residual(self.imap, self.imap.target, self.grid, 'h'), 1e-8)
        self.assertLess(codazzi_residual(self.imap, self.imap.target, self.grid, 'b'), 1e-8)

    def test_grid_is_cached(self):
        self.assertIs(build_grid(self.imap, 32), self.grid)

    def test_cache_is_per_map(self):
        twin = build('flat-torus', radii=[1.0, 1.0])
        self.assertIsNot(build_grid(twin, 32), self.grid)
        self.assertIs(build_grid(twin, 32), build_grid(twin, 32))
        self.assertNotEqual(twin.token, self.imap.token)

    def test_no_atlas_split_on_a_torus(self):
        self.assertIsNone(self.grid.atlas_volumes)
        self.assertNotIn('chart_split', field_report(self.imap, self.grid).integrals)

    def test_invalid_requests(self):
        with self.assertRaises(ConfigurationError):
            build_grid(self.imap, 4)
        with self.assertRaises(ConfigurationError):
            derivative_fields(self.grid, 'spectral')
        with self.assertRaises(ConfigurationError):
            codazzi_residual(self.imap, self.imap.target, self.grid, 'g')


class TestWhitneyField(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        clear_cache()

    def test_whitney_cn(self):
        imap = build('whitney-cn', n=2, r=1.0)
        grid = build_grid(imap, 24)
        report = field_report(imap, grid)
        self.assertEqual(report.gap.verdict, GapVerdict.WHITNEY_CONSISTENT)
        self.assertLess(report.stats['B_norm2']['sup'], 1e-9)
        self.assertLess(report.maslov['sup_defect'], 1e-5)
        self.assertLess(report.maslov['equivalence_residual'], 1e-5)
        self.assertLess(report.codazzi['h'], 1e-4)
        self.assertLess(report.codazzi['b'], 1e-4)
        self.assertLess(report.codazzi['b_explicit_form'], 1e-6)
        self.assertGreaterEqual(report.simons['margin'], -1e-5)

    def test_grid_derivatives_on_a_fine_polar_grid(self):
        imap = build('whitney-cn', n=2, r=1.0)
        grid = build_grid(imap, 128)
        self.assertLess(codazzi_residual(imap, imap.target, grid, 'h', derivative='grid'), 1e-4)
        self.assertLess(codazzi_residual(imap, imap.target, grid, 'b', derivative='grid'), 1e-4)
        self.assertLess(maslov_conformal_defect(imap, imap.target, grid, derivative='grid').sup_defect, 1e-4)

    def test_stencil_on_an_open_axis(self):
        grid = build_grid(build('whitney-cn', n=2), 16)
        theta = grid.points[..., 0]
        derivative = grid.stencil_derivative(np.sin(theta), 0)
        self.assertTrue(np.all(np.isfinite(derivative)))
        np.testing.assert_allclose(derivative, np.cos(theta), atol=1e-5)
        with self.assertRaises(ConfigurationError):
            grid.stencil_derivative(np.sin(theta), 0, points=17)

    def test_stencil_weights_are_exact_on_polynomials(self):
        for offsets in (range(-3, 4), range(0, 7), range(-5, 2)):
            s = np.asarray(list(offsets), dtype=float)
            w = stencil_weights(offsets)
            moments = [float(np.dot(w, s ** k)) for k in range(len(s))]
            np.testing.assert_allclose(moments, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], atol=1e-10)

    def test_chart_split_volume(self):
        imap = build('whitney-cn', n=2, r=1.0)
        volumes = atlas_volumes(imap, 64)
        self.assertLess(volumes['relative_difference'], 1e-4)
        self.assertAlmostEqual(volumes['north'] + volumes['south'], volumes['polar'], delta=1e-4 * volumes['polar'])
        self.assertGreater(min(volumes['north'], volumes['south']), 0.0)
        grid = build_grid(imap, 24)
        report = field_report(imap, grid)
        self.assertIn('chart_split', report.integrals)
        self.assertFalse(any('chart-split' in message for message in grid.warnings))

    def test_polar_grid_skips_caps(self):
        grid = build_grid(build('whitney-cn', n=2), 16)
        self.assertFalse(grid.periodic[0])
        self.assertGreater(grid.axes[0][0], 0.0)
        self.assertLess(grid.axes[0][-1], np.pi)
        lap = laplace_beltrami(grid, grid.pointwise.invariants.h_norm2)
        self.assertTrue(np.all(np.isnan(lap[0])))
        self.assertTrue(np.all(np.isfinite(lap[1:-1])))
        self.assertTrue(np.all(grid.weights > 0))

    def test_whitney_cpn(self):
        imap = build('whitney-cpn', n=2, theta=1.0)
        grid = build_grid(imap, 16)
        verdict = gap_verdict(grid.pointwise.invariants, 2, 1.0)
        self.assertEqual(verdict.verdict, GapVerdict.WHITNEY_CONSISTENT)
        self.assertLess(float(np.max(grid.pointwise.invariants.B_norm2)), 1e-7)
        self.assertLess(verdict.uniform_bound_excess, 0.0)

    def test_clifford_torus_is_minimal_excluded(self):
        imap = build('flat-torus-cpn', radii=[1.0, 1.0, 1.0])
        grid = build_grid(imap, 16)
        verdict = gap_verdict(grid.pointwise.invariants, 2, 1.0)
        self.assertEqual(verdict.verdict, GapVerdict.MINIMAL_EXCLUDED)


class TestPerturbedField(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        clear_cache()

    def test_perturbation_breaks_conformal_maslov(self):
        imap = perturbed_torus()
        grid = build_grid(imap, 32)
        self.assertGreater(maslov_conformal_defect(imap, imap.target, grid).sup_defect, 1e-2)
        # Codazzi for h holds on any Lagrangian immersion
        self.assertLess(codazzi_residual(imap, imap.target, grid, 'h'), 1e-8)

    def test_perturbation_breaks_conformal_maslov_on_a_sphere(self):
        imap = perturbed_whitney()
        grid = build_grid(imap, 24)
        self.assertGreater(maslov_conformal_defect(imap, imap.target, grid).sup_defect, 1e-2)
        self.assertLess(codazzi_residual(imap, imap.target, grid, 'h'), 1e-6)

    def test_perturbation_breaks_codazzi_for_b(self):
        imap = perturbed_torus()
        grid = build_grid(imap, 32)
        self.assertGreater(codazzi_residual(imap, imap.target, grid, 'b'), 1e-2)

    def test_grid_derivatives_converge(self):
        imap = perturbed_torus()
        coarse = build_grid(imap, 32)
        fine = build_grid(imap, 64)
        r_coarse = codazzi_residual(imap, imap.target, coarse, 'h', derivative='grid')
        r_fine = codazzi_residual(imap, imap.target, fine, 'h', derivative='grid')
        self.assertLess(r_fine, r_coarse / 2.0)
        exact = derivative_fields(fine, 'jet').h3
        approx = derivative_fields(fine, 'grid').h3
        self.assertLess(np.max(np.abs(exact - approx)), 1e-2)

    def test_coarse_grid_warning(self):
        imap = perturbed_torus()
        fields = derivative_fields(build_grid(imap, 16), 'grid')
        self.assertTrue(any('coarse' in message for message in fields.warnings))


class TestThresholds(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)

    def test_threshold_forms_agree(self):
        H2 = np.linspace(0.0, 3.0, 31)
        for n in (2, 3, 4):
            for c in (0.0, 0.5, 1.0):
                thr_B, thr_h = gap_thresholds(H2, n, c)
                np.testing.assert_allclose(thr_h - thr_B, 3.0 * n * n / (n + 2.0) * H2, atol=1e-12)

    def test_simons_bracket(self):
        self.assertAlmostEqual(simons_bracket(0.5, 0.5, 2, 0.0), -0.5)
        self.assertAlmostEqual(simons_bracket(1.0, 0.0, 2, 1.0), 3.0 - 3.0)

    def test_negative_curvature_is_unsupported(self):
        grid_inv = build_grid(build('flat-torus', radii=[1.0, 1.0]), 16).pointwise.invariants
        with self.assertRaises(UnsupportedAmbientError):
            gap_verdict(grid_inv, 2, -1.0)


if __name__ == '__main__':
    unittest.main()
