"""Tests for marching-squares contours and polygon helpers."""
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.level_sets import (find_contours, hausdorff, lerp_point, match_components,
                                   points_in_polygon, polygon_area)


def _grid(n=101, lo=-1.0, hi=1.0):
    x = np.linspace(lo, hi, n)
    XX, YY = np.meshgrid(x, x)
    return x, XX, YY


def _circle(radius, center=(0.0, 0.0), n=200):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


class TestFindContours(unittest.TestCase):
    def test_circle_is_one_closed_loop(self):
        """A level set of x²+y² is one closed loop of the right radius."""
        x, XX, YY = _grid()
        contours = find_contours(XX ** 2 + YY ** 2, x, x, 0.25)
        self.assertEqual(len(contours), 1)
        loop = contours[0]
        self.assertTrue(loop.closed)
        radii = np.hypot(loop.points[:, 0], loop.points[:, 1])
        np.testing.assert_allclose(radii, 0.5, atol=1e-3)
        self.assertAlmostEqual(loop.length, np.pi, delta=1e-2)

    def test_line_is_open(self):
        """A level set crossing the grid border is an open curve."""
        x, XX, YY = _grid()
        contours = find_contours(XX, x, x, 0.03)
        self.assertEqual(len(contours), 1)
        self.assertFalse(contours[0].closed)
        np.testing.assert_allclose(contours[0].points[:, 0], 0.03, atol=1e-12)
        self.assertAlmostEqual(contours[0].length, 2.0, places=9)

    def test_two_separate_loops(self):
        """Two wells give two loops."""
        x, XX, YY = _grid(n=161, lo=-2.0, hi=2.0)
        values = np.minimum((XX - 1) ** 2 + YY ** 2, (XX + 1) ** 2 + YY ** 2)
        contours = find_contours(values, x, x, 0.09)
        self.assertEqual(len(contours), 2)
        self.assertTrue(all(c.closed for c in contours))

    def test_masked_nodes_break_curves(self):
        """Cells touching NaN nodes contribute nothing."""
        x, XX, YY = _grid()
        values = XX ** 2 + YY ** 2
        values[:, :50] = np.nan
        contours = find_contours(values, x, x, 0.25)
        self.assertTrue(contours)
        for c in contours:
            self.assertFalse(c.closed)
            self.assertTrue(np.all(c.points[:, 0] >= x[50] - 1e-12))

    def test_periodic_wrap(self):
        """On a torus grid a level of sin(y) gives two closed loops."""
        n = 64
        x = 2 * np.pi * np.arange(n) / n
        XX, YY = np.meshgrid(x, x)
        contours = find_contours(np.sin(YY), x, x, 0.5, periodic=True)
        self.assertEqual(len(contours), 2)
        for c in contours:
            self.assertTrue(c.closed)
            self.assertEqual(len(c), n)

    def test_lerp_point(self):
        """Linear interpolation hits the requested level."""
        self.assertEqual(lerp_point((0.0, 0.0), (1.0, 0.0), 0.0, 2.0, 0.5), (0.25, 0.0))


class TestPolygons(unittest.TestCase):
    def test_signed_area(self):
        """Shoelace area is positive counterclockwise."""
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        self.assertAlmostEqual(polygon_area(square), 1.0)
        self.assertAlmostEqual(polygon_area(square[::-1]), -1.0)

    def test_points_in_polygon(self):
        """Even-odd membership on a square."""
        square = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
        inside = points_in_polygon([0.5, 1.5, 0.1], [0.5, 0.5, 0.9], square)
        self.assertEqual(inside.tolist(), [True, False, True])

    def test_hausdorff(self):
        """Concentric circles are their radius gap apart."""
        self.assertAlmostEqual(hausdorff(_circle(1.0), _circle(1.25)), 0.25, places=9)

    def test_match_components(self):
        """Assignment recovers a permutation and drops distant pairs."""
        prev = [_circle(0.3, (-1, 0)), _circle(0.3, (1, 0))]
        cur = [_circle(0.31, (1, 0)), _circle(0.31, (-1, 0))]
        self.assertEqual(sorted(match_components(prev, cur)), [(0, 1), (1, 0)])
        self.assertEqual(match_components(prev, [_circle(0.3, (5, 5))], threshold=0.5), [])
        self.assertEqual(match_components([], cur), [])


if __name__ == '__main__':
    unittest.main()
