"""Tests for the closed-form field catalog."""
import os
import sys
import unittest

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.calculus import poisson_bracket, steady_residual
from steadyflow.catalog import (J01, catalog_field, catalog_names, field_from_spec, flux_callable,
                                ground_truth_points)
from steadyflow.errors import CatalogError, SpecParseError


class TestCatalogLookup(unittest.TestCase):
    def test_names(self):
        """The documented entries are all present."""
        names = catalog_names()
        for expected in ["sinsin", "sin2sin2", "radial-poly", "disk-eigen", "shear", "two-bump",
                         "perturbed-radial", "radial-even", "counterexample"]:
            self.assertIn(expected, names)

    def test_unknown_name(self):
        """Unknown entries raise CatalogError naming the known ones."""
        with self.assertRaises(CatalogError) as ctx:
            catalog_field("no-such-field")
        self.assertIn("sinsin", str(ctx.exception))

    def test_unknown_parameter(self):
        """Unknown parameters are rejected."""
        with self.assertRaises(CatalogError):
            catalog_field("radial-poly", {"q": 3})

    def test_out_of_range_parameter(self):
        """Parameters outside their documented range are rejected."""
        with self.assertRaises(CatalogError):
            catalog_field("radial-poly", {"p": 1})
        with self.assertRaises(CatalogError):
            catalog_field("bump-of-f", {"s0": 1.5})

    def test_overlapping_bumps(self):
        """Two-bump supports must be disjoint."""
        with self.assertRaises(CatalogError):
            catalog_field("two-bump", {"c2x": 0.5, "c2y": 0.0})

    def test_params_recorded(self):
        """Merged parameters are stored in the metadata."""
        f = catalog_field("radial-poly", {"p": 3})
        self.assertEqual(f.metadata["params"]["p"], 3)
        self.assertEqual(f.metadata["catalog"], "radial-poly")

    def test_field_from_spec_text(self):
        """Spec text builds the same field as the direct call."""
        f = field_from_spec("name=radial-poly; params={p:3}; domain={radius:1.0}")
        self.assertAlmostEqual(float(f(0.5, 0.0)), 0.75 ** 3, places=14)
        with self.assertRaises(SpecParseError):
            field_from_spec("params={p:3}")


class TestGroundTruth:
    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_radial_poly_flux(self, p):
        """lap psi equals the recorded F(psi) for (1 - r^2)^p."""
        f = catalog_field("radial-poly", {"p": p})
        F = flux_callable(f)
        lap = f.laplacian()
        x = np.array([0.1, 0.3, -0.5, 0.2])
        y = np.array([0.2, -0.4, 0.1, 0.7])
        np.testing.assert_allclose(lap(x, y), F(f(x, y)), atol=1e-11)

    def test_disk_eigen(self):
        """The eigenfunction vanishes on the unit circle and has F = -j01^2 s."""
        f = catalog_field("disk-eigen")
        t = np.linspace(0, 2 * np.pi, 7)
        np.testing.assert_allclose(f(np.cos(t), np.sin(t)), 0.0, atol=1e-12)
        lap = f.laplacian()
        x, y = np.array([0.2, -0.6]), np.array([0.3, 0.1])
        np.testing.assert_allclose(lap(x, y), -J01 ** 2 * f(x, y), atol=1e-10)

    def test_radial_even_flux(self):
        """1 - r^6 satisfies lap psi = -36 (1 - psi)^(2/3)."""
        f = catalog_field("radial-even", {"m": 3})
        F = flux_callable(f)
        x, y = np.array([0.3, 0.6]), np.array([0.4, -0.2])
        np.testing.assert_allclose(f.laplacian()(x, y), F(f(x, y)), atol=1e-12)

    def test_sinsin_truth(self):
        """sinsin records its eight critical points, all of degree 2."""
        pts = ground_truth_points(catalog_field("sinsin"))
        assert len(pts) == 8
        assert all(d == 2 for _, d in pts)

    def test_no_flux_for_controls(self):
        """Fields without a global F return no flux callable."""
        assert flux_callable(catalog_field("perturbed-radial")) is None
        assert flux_callable(catalog_field("two-bump")) is None

    def test_bump_value(self):
        """The bump-of-f field takes its recorded value where sin x sin y = 1/2."""
        f = catalog_field("bump-of-f")
        x = np.pi / 2
        y = np.arcsin(0.5)
        assert float(f(x, y)) == pytest.approx(f.metadata["value_at_half"], rel=1e-12)

    def test_bump_commutes_but_is_not_steady(self):
        """bump-of-f commutes with sinsin yet its own residual is large."""
        f = catalog_field("bump-of-f")
        assert f.metadata["steady"] is False
        assert f.metadata["commutes_with"] == "sinsin"
        x = np.array([1.0, 1.3, 2.0])
        y = np.array([1.2, 0.9, 1.6])
        pair = poisson_bracket(catalog_field("sinsin"), f).field(x, y)
        np.testing.assert_allclose(pair, 0.0, atol=1e-10)
        assert steady_residual(f, resolution=64) > 1e-2


if __name__ == '__main__':
    unittest.main()
