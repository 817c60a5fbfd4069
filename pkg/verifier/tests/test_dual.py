import os
import sys
import unittest

import numpy as np

# Add verifier directory to path so we can import app modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from app import create_app
from app.config import TestingConfig
from app.services.jet_service import differentiate
from app.utils import dual


def sin_times_square(p):
    return dual.sin(p[..., 0]) * p[..., 1] ** 2


class TestDualNumbers(unittest.TestCase):
    def setUp(self):
        self.app = create_app(TestingConfig)

    def test_power_rule(self):
        x = dual.Dual(2.0, 1.0) ** 3
        self.assertEqual(x.real, 8.0)
        self.assertEqual(x.eps, 12.0)

    def test_quotient_rule(self):
        x = 1.0 / dual.Dual(2.0, 1.0)
        self.assertAlmostEqual(x.real, 0.5)
        self.assertAlmostEqual(x.eps, -0.25)

    def test_plain_arrays_pass_through(self):
        x = np.array([[0.3, 2.0]])
        np.testing.assert_allclose(sin_times_square(x), [np.sin(0.3) * 4.0])

    def test_nested_levels_give_all_derivatives(self):
        a, b = 0.7, -1.3
        value, d1, d2, d3 = differentiate(sin_times_square, np.array([[a, b]]), 3)
        s, c = np.sin(a), np.cos(a)
        np.testing.assert_allclose(value, [s * b * b], atol=1e-15)
        np.testing.assert_allclose(d1[0], [c * b * b, 2 * s * b], atol=1e-14)
        np.testing.assert_allclose(d2[0], [[-s * b * b, 2 * c * b], [2 * c * b, 2 * s]], atol=1e-14)
        expected = np.zeros((2, 2, 2))
        expected[0, 0, 0] = -c * b * b
        for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
            expected[idx] = -2 * s * b
        for idx in ((0, 1, 1), (1, 0, 1), (1, 1, 0)):
            expected[idx] = 2 * c
        np.testing.assert_allclose(d3[0], expected, atol=1e-14)

    def test_scalar_output_third_derivatives_are_float(self):
        x = np.array([[0.2, 1.5], [-0.4, 2.0]])
        value, d1, d2, d3 = differentiate(lambda p: p[..., 1] ** 3, x, 3)
        self.assertEqual(d3.dtype, np.float64)
        self.assertEqual(d3.shape, (2, 2, 2, 2))
        np.testing.assert_allclose(d3[:, 1, 1, 1], [6.0, 6.0], atol=1e-13)
        np.testing.assert_allclose(d3[:, 0, 1, 1], [0.0, 0.0], atol=1e-13)
        self.assertFalse(np.any(np.isnan(d3)))

    def test_seeded_tangent_levels_hold_plain_leaves(self):
        seeded = dual.seed(np.zeros((1, 2)), [np.ones((1, 2))] * 3)
        zero_part = seeded.eps.eps
        while isinstance(zero_part, dual.Dual):
            zero_part = zero_part.real
        self.assertEqual(np.asarray(zero_part).dtype, np.float64)

    def test_batched_vector_output(self):
        def circle(p):
            return dual.stack([dual.cos(p[..., 0]), dual.sin(p[..., 0])], axis=-1)

        t = np.array([[0.0], [np.pi / 2]])
        value, d1 = differentiate(circle, t, 1)
        self.assertEqual(d1.shape, (2, 2, 1))
        np.testing.assert_allclose(value, [[1.0, 0.0], [0.0, 1.0]], atol=1e-15)
        np.testing.assert_allclose(d1[..., 0], [[0.0, 1.0], [-1.0, 0.0]], atol=1e-15)

    def test_depth(self):
        seeded = dual.seed(np.zeros((1, 1, 2)), [np.ones((1, 1, 2))] * 2)
        self.assertEqual(dual.depth(seeded), 2)
        self.assertEqual(dual.depth(np.zeros(3)), 0)


if __name__ == '__main__':
    unittest.main()
