import os
import sys
import unittest

import numpy as np

# Add verifier directory to path so we can import app modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app import create_app
from app.config import TestingConfig
from app.middleware.error_handler import ChartConditioningError, ConfigurationError, UnsupportedAmbientError
from app.services.ambient_service import (
    AmbientModel, FUBINI_STUDY, ambient_jet, change_chart, check_chart_conditioning, christoffels_at,
    complex_structure_at, complex_structure_residual, curvature_residual, flat_space, from_affine, kahler_form_at,
    metric_at, metric_compatibility_residual, projective_space, sectional_curvature, select_chart, to_affine
)


class TestAmbientModels(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)
        self.rng = np.random.default_rng(7)

    def test_flat_metric_is_identity(self):
        G = metric_at(flat_space(2), self.rng.normal(size=(5, 4)))
        np.testing.assert_array_equal(G, np.broadcast_to(np.eye(4), (5, 4, 4)))
        self.assertEqual(curvature_residual(flat_space(3), np.zeros(6)), 0.0)

    def test_fubini_study_at_origin(self):
        for c in (0.5, 1.0, 2.0):
            np.testing.assert_allclose(metric_at(projective_space(2, c), np.zeros(4)), np.eye(4) / c)

    def test_kahler_form_is_antisymmetric(self):
        y = 0.4 * self.rng.uniform(-1, 1, size=(10, 4))
        omega = kahler_form_at(projective_space(2), y)
        np.testing.assert_allclose(omega, -np.swapaxes(omega, -1, -2), atol=1e-14)

    def test_curvature_matches_space_form(self):
        for n in (2, 3):
            for c in (0.5, 1.0, 2.0):
                y = 0.6 * self.rng.uniform(-1, 1, size=(20, 2 * n)) / np.sqrt(n)
                self.assertLess(curvature_residual(projective_space(n, c), y), 1e-6)

    def test_sectional_curvatures(self):
        model = projective_space(2, 1.5)
        y = np.zeros(4)
        # holomorphic plane span(X, JX) and a totally real plane
        self.assertAlmostEqual(float(sectional_curvature(model, y, np.array([1.0, 0, 0, 0]), np.array([0, 0, 1.0, 0]))), 6.0, places=8)
        self.assertAlmostEqual(float(sectional_curvature(model, y, np.array([1.0, 0, 0, 0]), np.array([0, 1.0, 0, 0]))), 1.5, places=8)

    def test_levi_civita_and_kahler(self):
        y = 0.5 * self.rng.uniform(-1, 1, size=(10, 4))
        model = projective_space(2)
        self.assertLess(metric_compatibility_residual(model, y), 1e-10)
        self.assertLess(complex_structure_residual(model, y), 1e-8)

    def test_christoffels_symmetric(self):
        gamma = ambient_jet(projective_space(2), 0.3 * self.rng.normal(size=(3, 4))).gamma
        np.testing.assert_allclose(gamma, np.swapaxes(gamma, -1, -2), atol=1e-13)

    def test_chart_round_trip(self):
        n = 2
        y = 0.5 * self.rng.uniform(-1, 1, size=(6, 2 * n))
        Z = from_affine(y, 1, n)
        np.testing.assert_allclose(to_affine(Z, 1, n), y, atol=1e-14)
        moved = change_chart(y, 1, 0, n)
        np.testing.assert_allclose(change_chart(moved, 0, 1, n), y, atol=1e-12)

    def chart_jacobian(self, y, from_chart, to_chart, n, step=1e-6):
        columns = []
        for k in range(2 * n):
            e = np.zeros(2 * n)
            e[k] = step
            columns.append((change_chart(y + e, from_chart, to_chart, n)
                            - change_chart(y - e, from_chart, to_chart, n)) / (2.0 * step))
        return np.stack(columns, axis=-1)

    def test_chart_change_is_an_isometry(self):
        n = 2
        model = projective_space(n, 1.5)
        for y in (np.array([0.3, 0.2, -0.1, 0.25]), np.array([0.6, -0.4, 0.1, 0.3])):
            z = change_chart(y, 0, 1, n)
            D = self.chart_jacobian(y, 0, 1, n)
            np.testing.assert_allclose(D.T @ metric_at(model, z) @ D, metric_at(model, y), atol=1e-8)

    def test_chart_change_preserves_sectional_curvature(self):
        n = 2
        model = projective_space(n, 1.0)
        y = np.array([0.4, -0.3, 0.2, 0.1])
        z = change_chart(y, 0, 2, n)
        D = self.chart_jacobian(y, 0, 2, n)
        X, Y = self.rng.normal(size=4), self.rng.normal(size=4)
        here = sectional_curvature(model, y, X, Y)
        there = sectional_curvature(model, z, D @ X, D @ Y)
        self.assertAlmostEqual(float(here), float(there), delta=1e-6)
        self.assertGreaterEqual(float(here), 1.0 - 1e-9)
        self.assertLessEqual(float(here), 4.0 + 1e-9)

    def test_complex_structure_is_an_isometry(self):
        model = projective_space(3, 0.8)
        y = 0.4 * self.rng.normal(size=(5, 6))
        J = complex_structure_at(model, y)
        G = metric_at(model, y)
        np.testing.assert_allclose(J @ J, np.broadcast_to(-np.eye(6), (5, 6, 6)), atol=1e-15)
        np.testing.assert_allclose(np.swapaxes(J, -1, -2) @ G @ J, G, atol=1e-14)

    def test_christoffels_match_metric_differences(self):
        model = projective_space(2, 1.3)
        y = np.array([0.35, -0.2, 0.15, 0.4])
        step = 1e-5
        dg = np.stack([(metric_at(model, y + step * e) - metric_at(model, y - step * e)) / (2.0 * step)
                       for e in np.eye(4)], axis=-1)
        first = 0.5 * (np.einsum('dbc->dcb', dg) + dg - np.einsum('bcd->dbc', dg))
        expected = np.einsum('ad,dbc->abc', np.linalg.inv(metric_at(model, y)), first)
        gamma = christoffels_at(model, y)
        np.testing.assert_allclose(gamma, expected, atol=1e-8)
        np.testing.assert_allclose(gamma, np.swapaxes(gamma, -1, -2), atol=1e-14)
        np.testing.assert_allclose(christoffels_at(model, np.zeros(4)), 0.0, atol=1e-15)
        np.testing.assert_array_equal(christoffels_at(flat_space(2), y), 0.0)

    def test_select_chart_prefers_largest_modulus(self):
        Z = np.array([0.1, 2.0, 0.3, 0.0, 0.0, 0.0])
        self.assertEqual(int(select_chart(Z, 2)), 1)

    def test_chart_conditioning(self):
        check_chart_conditioning(projective_space(2), np.array([0.5, 0.1, 0.2, 0.3]))
        with self.assertRaises(ChartConditioningError) as ctx:
            check_chart_conditioning(projective_space(2), np.array([[0.0, 0.0, 0.0, 0.0], [2.0, 0.0, 0.0, 0.0]]))
        self.assertEqual(ctx.exception.location, (1,))

    def test_invalid_models(self):
        with self.assertRaises(UnsupportedAmbientError):
            AmbientModel(FUBINI_STUDY, 2, -1.0)
        with self.assertRaises(ConfigurationError):
            AmbientModel(FUBINI_STUDY, 2, 0.0)
        with self.assertRaises(ConfigurationError):
            AmbientModel('flat', 0, 0.0)
        with self.assertRaises(ConfigurationError):
            flat_space(1)


if __name__ == '__main__':
    unittest.main()
