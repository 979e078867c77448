"""Tests for degrees of vanishing, critical sets and the cell decomposition."""
import os
import sys

import numpy as np
import pytest
import sympy as sp

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.catalog import catalog_field
from steadyflow.critical_set import (CriticalComponent, degree_relation_check,
                                     detect_local_radiality, find_critical_set, innermost_loop,
                                     vanishing_degree)
from steadyflow.errors import DecompositionError, DomainError, ResolutionError
from steadyflow.fields import Domain, SymbolicField, X, Y


@pytest.fixture(scope="module")
def radial_p2():
    return catalog_field("radial-poly", {"p": 2})


@pytest.fixture(scope="module")
def radial_components(radial_p2):
    return find_critical_set(radial_p2, 128)


def _unit_circle(n=64):
    t = 2 * np.pi * np.arange(n) / n
    return np.column_stack([np.cos(t), np.sin(t)])


class TestVanishingDegree:
    def test_regular_point(self):
        """Degree 1 where the gradient is nonzero."""
        f = SymbolicField(X ** 2 + Y ** 2, Domain.disk())
        assert vanishing_degree(f, (0.5, 0.0)).degree == 1

    def test_minimum(self):
        """Degree 2 at a nondegenerate minimum."""
        result = vanishing_degree(SymbolicField(X ** 2 + Y ** 2, Domain.disk()), (0.0, 0.0))
        assert result.degree == 2
        assert not result.exceeds
        assert result.confidence == float("inf")

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_boundary_curve_degree(self, p):
        """(1 - r²)^p vanishes to order p on the unit circle."""
        f = catalog_field("radial-poly", {"p": p})
        assert vanishing_degree(f, (0.0, 1.0)).degree == p

    def test_flat_point_exceeds_order(self):
        """All Taylor norms below tolerance report no degree."""
        f = SymbolicField(X ** 12 + Y ** 12, Domain.disk())
        result = vanishing_degree(f, (0.0, 0.0))
        assert result.degree is None
        assert result.exceeds

    def test_outside_domain(self):
        """Points outside the domain are refused."""
        with pytest.raises(DomainError):
            vanishing_degree(catalog_field("radial-poly"), (2.0, 0.0))


class TestCriticalSet:
    def test_sinsin_isolated_points(self):
        """sin x sin y has eight nondegenerate critical points on the torus."""
        components = find_critical_set(catalog_field("sinsin"), 64)
        assert len(components) == 8
        assert all(c.kind == "isolated" and c.degree == 2 for c in components)

    def test_radial_center_and_wall(self, radial_components):
        """(1 - r²)² has a center point and a degree-2 boundary loop."""
        kinds = sorted(c.kind for c in radial_components)
        assert kinds == ["isolated", "loop"]
        center = next(c for c in radial_components if c.kind == "isolated")
        np.testing.assert_allclose(center.points[0], [0.0, 0.0], atol=1e-8)
        loop = next(c for c in radial_components if c.kind == "loop")
        np.testing.assert_allclose(np.hypot(loop.points[:, 0], loop.points[:, 1]), 1.0, atol=1e-6)
        assert loop.degree == 2
        assert loop.region().contains(0.0, 0.0)


    def test_sin2sin2_walls(self):
        """sin²x sin²y has degree-2 critical lines meeting at degree-4 crossings."""
        components = find_critical_set(catalog_field("sin2sin2"), 64)
        curves = [c for c in components if c.is_curve]
        assert curves
        assert all(c.degree == 2 for c in curves)
        crossings = [c for c in components if c.branch]
        assert crossings
        assert all(c.degree == 4 for c in crossings)
        for c in crossings:
            np.testing.assert_allclose(np.mod(c.points[0] + 0.5, np.pi) - 0.5, [0.0, 0.0],
                                       atol=1e-6)

    def test_components_closer_than_two_cells(self):
        """Critical lines 0.08 apart cannot be told apart on a 0.05 grid."""
        f = SymbolicField(X ** 3 - 0.0048 * X, Domain.disk())
        with pytest.raises(ResolutionError):
            find_critical_set(f, 41)

    def test_components_resolved_on_finer_grid(self):
        """The same two lines are separate arcs once the grid is fine enough."""
        f = SymbolicField(X ** 3 - 0.0048 * X, Domain.disk())
        components = find_critical_set(f, 161)
        assert len(components) == 2
        assert all(c.is_curve and c.degree == 2 for c in components)
        xs = sorted(float(np.mean(c.points[:, 0])) for c in components)
        np.testing.assert_allclose(xs, [-0.04, 0.04], atol=1e-9)


class TestDecomposition:
    def test_innermost_cell(self, radial_p2, radial_components):
        """The disk inside the critical loop is the innermost cell."""
        dec = innermost_loop(radial_components, radial_p2.domain, 128)
        assert not dec.no_critical_curves
        assert dec.innermost_cell is not None
        assert dec.innermost_region().contains(0.1, -0.2)

    def test_no_walls(self):
        """Without critical curves the domain is a single cell."""
        f = catalog_field("sinsin")
        dec = innermost_loop(find_critical_set(f, 64), f.domain, 64)
        assert dec.no_critical_curves
        assert len(dec.cells) == 1

    def test_anomalous_component(self):
        """Anomalous components stop the decomposition."""
        bad = CriticalComponent("arc", _unit_circle(), [2, 3] * 32, False, anomalous=True)
        with pytest.raises(DecompositionError):
            innermost_loop([bad], Domain.disk(radius=2.0), 64)

    def test_local_radiality(self, radial_p2, radial_components):
        """The inner cell of a radial field is detected as radial about the origin."""
        dec = innermost_loop(radial_components, radial_p2.domain, 128)
        verdicts = detect_local_radiality(radial_p2, dec)
        inner = next(v for v in verdicts if v.cell == dec.innermost)
        assert inner.verdict == "radial"
        np.testing.assert_allclose(inner.center, [0.0, 0.0], atol=1e-5)


class TestDegreeRelation:
    def test_degree_three_curve(self):
        """On a degree-3 curve the vorticity vanishes to order one."""
        f = catalog_field("radial-poly", {"p": 3})
        loop = CriticalComponent("loop", _unit_circle(), [3] * 64, True)
        report = degree_relation_check(f, loop)
        assert report.mode == "degree"
        assert report.all_passed
        assert set(report.measured) == {1}

    def test_degree_two_curve(self):
        """On a degree-2 curve the vorticity is nonzero."""
        f = catalog_field("radial-poly", {"p": 2})
        loop = CriticalComponent("loop", _unit_circle(), [2] * 64, True)
        report = degree_relation_check(f, loop)
        assert report.mode == "nonvanishing"
        assert report.all_passed

    def test_needs_a_curve(self):
        """Isolated points are not curves."""
        point = CriticalComponent("isolated", np.zeros((1, 2)), [2], True)
        with pytest.raises(ValueError):
            degree_relation_check(catalog_field("radial-poly"), point)
