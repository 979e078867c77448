"""Tests for operators, steady residuals and convergence probes."""
import os
import sys
import unittest

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.calculus import (convergence_probe, grid_laplacian, interior_nodes, laplacian,
                                 perp_gradient, poisson_bracket, residual_report, steady_residual)
from steadyflow.catalog import catalog_field
from steadyflow.errors import DomainError
from steadyflow.fields import Domain, SymbolicField, X, Y, sample_grid

TORUS = Domain.periodic_rectangle()
F_TORUS = SymbolicField(sp.sin(X) * sp.cos(2 * Y) + sp.cos(X), TORUS, "f")
G_TORUS = SymbolicField(sp.exp(sp.sin(Y)) * sp.cos(X), TORUS, "g")
coord = st.floats(min_value=0.0, max_value=2 * np.pi, allow_nan=False)


class TestSteadyResidual(unittest.TestCase):
    def test_steady_catalog_fields(self):
        """Steady catalog fields have residual at rounding level."""
        for name, params in [("sinsin", {}), ("disk-eigen", {}), ("radial-poly", {"p": 2}),
                             ("radial-poly", {"p": 3}), ("shear", {})]:
            with self.subTest(field=name, params=params):
                report = residual_report(catalog_field(name, params), 256)
                self.assertLessEqual(report.sup_residual, 1e-9)
                self.assertEqual(report.scheme, "exact")

    def test_two_bump_is_steady(self):
        """Two disjoint radial bumps form a steady field."""
        self.assertLessEqual(steady_residual(catalog_field("two-bump"), resolution=128), 1e-9)

    def test_perturbed_control(self):
        """The perturbed radial field is clearly not steady."""
        report = residual_report(catalog_field("perturbed-radial"), 256)
        self.assertGreaterEqual(report.sup_residual, 1e-2)
        self.assertGreater(report.l2_residual, 0.0)

    def test_band_is_excluded(self):
        """Nodes near the disk boundary are excluded and counted."""
        report = residual_report(catalog_field("radial-poly", {"p": 2}), 64)
        self.assertGreater(report.excluded_nodes, 0)
        self.assertGreater(report.nodes, 0)

    def test_norm_argument(self):
        """Only sup and L2 norms are accepted."""
        with self.assertRaises(ValueError):
            steady_residual(catalog_field("sinsin"), norm="max")

    def test_grid_residual(self):
        """The order-6 grid scheme also sees sinsin as steady."""
        grid = sample_grid(catalog_field("sinsin"), 128)
        report = residual_report(grid)
        self.assertEqual(report.scheme, "fd6")
        self.assertLess(report.sup_residual, 1e-6)


class TestOperators:
    def test_perp_gradient(self):
        """The velocity is (-d2 f, d1 f)."""
        f = catalog_field("sinsin")
        res = perp_gradient(f)
        u, v = res.field
        assert res.scheme == "exact"
        assert float(u(0.3, 0.7)) == pytest.approx(-np.sin(0.3) * np.cos(0.7), abs=1e-14)
        assert float(v(0.3, 0.7)) == pytest.approx(np.cos(0.3) * np.sin(0.7), abs=1e-14)

    def test_grid_laplacian_matches(self):
        """The grid Laplacian of sinsin is accurate at 128 nodes."""
        f = catalog_field("sinsin")
        grid = sample_grid(f, 128)
        lap = grid_laplacian(grid)
        XX, YY = grid.node_coordinates()
        np.testing.assert_allclose(lap.values, -2 * np.sin(XX) * np.sin(YY), atol=1e-8)

    def test_laplacian_scheme(self):
        """Grid fields report fd6, closed forms report exact."""
        f = catalog_field("sinsin")
        assert laplacian(f).scheme == "exact"
        assert laplacian(sample_grid(f, 32)).scheme == "fd6"

    def test_domain_mismatch(self):
        """Brackets of fields on different domains are refused."""
        with pytest.raises(DomainError):
            poisson_bracket(catalog_field("sinsin"), catalog_field("radial-poly"))

    def test_interior_nodes_band(self):
        """Interior nodes keep their distance from masked nodes."""
        mask = np.zeros((20, 20), dtype=bool)
        mask[:, 0] = True
        keep = interior_nodes(mask, periodic=False, band_stencils=1)
        assert not keep[10, 3]
        assert keep[10, 10]
        assert interior_nodes(mask, periodic=True).sum() == 380

    @settings(max_examples=40, deadline=None)
    @given(coord, coord)
    def test_bracket_antisymmetry(self, x, y):
        """{f, g} = -{g, f} at random points."""
        fg = poisson_bracket(F_TORUS, G_TORUS).field(x, y)
        gf = poisson_bracket(G_TORUS, F_TORUS).field(x, y)
        assert float(fg) == pytest.approx(-float(gf), abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(coord, coord, st.floats(min_value=0.0, max_value=2 * np.pi))
    def test_bracket_rotation_invariance(self, x, y, angle):
        """{f∘R, g∘R} = {f, g}∘R for rotations R."""
        disk = Domain.disk(radius=10.0)
        f = SymbolicField(X ** 2 * Y + sp.sin(X), disk)
        g = SymbolicField(sp.cos(Y) + X * Y ** 2, disk)
        lhs = poisson_bracket(f.rotated(angle), g.rotated(angle)).field(x, y)
        c, s = np.cos(angle), np.sin(angle)
        rhs = poisson_bracket(f, g).field(c * x - s * y, s * x + c * y)
        assert float(lhs) == pytest.approx(float(rhs), rel=1e-9, abs=1e-9)


class TestConvergenceProbe:
    @pytest.mark.parametrize("name", ["sinsin", "disk-eigen"])
    def test_laplacian_order(self, name):
        """The grid Laplacian converges at order close to six."""
        report = convergence_probe("laplacian", catalog_field(name), [32, 64, 128])
        assert not report.exact
        assert report.order >= 5

    def test_bracket_order_torus(self):
        """The grid bracket converges at order close to six on the torus."""
        report = convergence_probe("bracket", F_TORUS, [32, 64, 128])
        assert report.order >= 5

    def test_bracket_order_disk(self):
        """The grid bracket converges at order close to six on a disk."""
        f = SymbolicField(sp.exp(-(X ** 2 + Y ** 2)), Domain.disk(), "gauss")
        report = convergence_probe("bracket", f, [32, 64, 128])
        assert report.order >= 5

    def test_polynomials_are_exact(self):
        """Low-degree polynomials are reproduced to rounding."""
        f = catalog_field("polynomial", {"expr": "x**2 + y**3"})
        report = convergence_probe("laplacian", f, [32, 64, 128])
        assert report.exact
        assert report.order is None

    def test_needs_three_resolutions(self):
        """Fewer than three resolutions is an error."""
        with pytest.raises(ValueError):
            convergence_probe("laplacian", catalog_field("sinsin"), [32, 64])


if __name__ == '__main__':
    unittest.main()
