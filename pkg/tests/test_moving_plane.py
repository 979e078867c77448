"""Tests for reflection sweeps, tangency events, Hopf checks and symmetry verdicts."""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.catalog import catalog_field
from steadyflow.errors import FluxError, SignChangeError, SweepError
from steadyflow.moving_plane import (DirectionReport, coefficient_audit, find_lambda0,
                                     hopf_sign_check, reflect, reflect_sweep, run_moving_plane,
                                     singular_quotient_check, state_quotient_check,
                                     symmetry_verdict, unit)


def _radial_p2_flux(s):
    return 8 - 16 * np.sqrt(np.clip(s, 0.0, None))


class _BranchedFlux:
    single_valued = False

    def __call__(self, s):
        return np.zeros_like(s)


@pytest.fixture(scope="module")
def radial_p2():
    return catalog_field("radial-poly", {"p": 2})


@pytest.fixture(scope="module")
def radial_states(radial_p2):
    return reflect_sweep(radial_p2, direction=(1.0, 0.0), lambdas=32, resolution=48)


class TestGeometry:
    def test_reflect(self):
        """Reflection through x = 1 maps (0, 2) to (2, 2)."""
        out = reflect(np.array([[0.0, 2.0]]), np.array([1.0, 0.0]), 1.0)
        np.testing.assert_allclose(out, [[2.0, 2.0]])

    def test_unit(self):
        """Directions are normalized and zero is refused."""
        np.testing.assert_allclose(unit((3.0, 4.0)), [0.6, 0.8])
        with pytest.raises(SweepError):
            unit((0.0, 0.0))

    def test_torus_has_no_region(self):
        """Periodic fields cannot be swept without a region."""
        with pytest.raises(SweepError):
            reflect_sweep(catalog_field("sinsin"))


class TestSweep:
    def test_sweep_stops_when_cap_leaves(self, radial_states):
        """States increase in lambda and stop at the first inadmissible cap."""
        lams = [st.lam for st in radial_states]
        assert lams == sorted(lams)
        assert not radial_states[-1].admissible
        assert all(st.admissible for st in radial_states[:-1])
        assert all(st.monotone for st in radial_states[:-1])

    def test_lambda0_at_center(self, radial_states):
        """The sweep of a radial field stops at the center."""
        lam0, event, good = find_lambda0(radial_states)
        assert abs(lam0) <= 1e-6
        assert good.ok
        assert good.hyperplane_residual() <= 1e-12
        assert event.kind in ("internal", "boundary", "monotonicity")

    def test_no_states(self):
        """An empty sweep has no lambda_0."""
        with pytest.raises(SweepError):
            find_lambda0([])

    def test_difference_is_odd(self, radial_states):
        """h changes sign under the reflection."""
        state = radial_states[3]
        h = state.difference()
        e = state.direction
        p = np.array([[-0.6, 0.3]])
        q = reflect(p, e, state.lam)
        assert float(h(p[0, 0], p[0, 1])) == pytest.approx(-float(h(q[0, 0], q[0, 1])), abs=1e-14)


class TestAudit:
    def test_audit_is_finite(self, radial_p2, radial_states):
        """The coefficient audit is finite and nonnegative for a decreasing F."""
        result = coefficient_audit(radial_p2, _radial_p2_flux, radial_states[5])
        assert np.isfinite(result.value)
        assert result.value >= 0.0
        assert result.samples > 0
        assert result.c_min < 0

    def test_audit_needs_single_valued(self, radial_p2, radial_states):
        """Branched relations cannot be audited."""
        with pytest.raises(FluxError):
            coefficient_audit(radial_p2, _BranchedFlux(), radial_states[5])

    def test_quotient_sign(self):
        """A decreasing fractional power gives a nonnegative quotient for d1 < 0."""
        u = np.array([0.2, 0.5, 0.9])
        v = np.array([0.1, 0.7, 0.3])
        assert singular_quotient_check(u, v, k0=2).passed
        assert not singular_quotient_check(u, v, k0=2, d1=1.0).passed

    def test_state_quotient(self, radial_states):
        """Sweep states of a positive field pass the quotient check."""
        check = state_quotient_check(radial_states[5], k0=2, value_range=(0.0, 1.0))
        assert check.samples > 0
        assert check.passed


class TestHopf:
    def test_internal_contact(self):
        """h = y (1 + x) has unit normal derivative at the origin."""
        report = hopf_sign_check(lambda x, y: y * (1 + x), (0.0, 0.0), "internal", normal=(0.0, 1.0))
        assert report.verdict == "positive"
        assert report.derivatives[0] == pytest.approx(1.0, abs=1e-8)

    def test_boundary_corner(self):
        """h = -x y is positive in the quarter region with positive second derivatives."""
        report = hopf_sign_check(lambda x, y: -x * y, (0.0, 0.0), "boundary")
        assert report.verdict == "positive"
        expected = [np.sin(2 * t) for t in (np.pi / 8, np.pi / 4, 3 * np.pi / 8)]
        np.testing.assert_allclose(report.derivatives, expected, atol=1e-6)

    def test_zero_difference(self):
        """A vanishing difference reports zero."""
        report = hopf_sign_check(lambda x, y: np.zeros_like(x), (0.0, 0.0), "internal")
        assert report.verdict == "zero"

    def test_sign_change(self):
        """Negative values in the half-ball are refused."""
        with pytest.raises(SignChangeError):
            hopf_sign_check(lambda x, y: x, (0.0, 0.0), "internal", normal=(0.0, 1.0))

    def test_unknown_kind(self):
        """Only internal and boundary contacts exist."""
        with pytest.raises(SignChangeError):
            hopf_sign_check(lambda x, y: y, (0.0, 0.0), "corner")


class TestVerdicts:
    def test_radial_field(self, radial_p2):
        """Sixteen symmetric directions with concurrent axes give a radial verdict."""
        report = run_moving_plane(radial_p2, directions=16, lambdas=32, resolution=48)
        assert report.verdict.kind == "radial"
        np.testing.assert_allclose(report.verdict.center, [0.0, 0.0], atol=1e-6)
        assert len(report.table()) == 16

    def test_ellipse_level_sets(self):
        """1 - x² - 4y² on the disk has exactly two symmetry axes."""
        psi = catalog_field("polynomial", {"expr": "1 - x**2 - 4*y**2"})
        verdict = run_moving_plane(psi, directions=16, lambdas=32, resolution=48).verdict
        assert verdict.kind == "axis-symmetric"
        assert len(verdict.axes) == 2
        angles = sorted(a for a, _ in verdict.axes)
        np.testing.assert_allclose(angles, [0.0, np.pi / 2], atol=1e-6)

    def test_two_bump(self):
        """Two unequal bumps off a common diameter have no symmetry axis."""
        report = run_moving_plane(catalog_field("two-bump"), directions=8, lambdas=32, resolution=48)
        assert report.verdict.kind == "asymmetric"
        assert report.verdict.axes == []

    def test_workers_agree(self, radial_p2):
        """Threaded sweeps give the same table as the serial run."""
        serial = run_moving_plane(radial_p2, directions=4, lambdas=16, resolution=32)
        threaded = run_moving_plane(radial_p2, directions=4, lambdas=16, resolution=32, workers=2)
        assert serial.table().equals(threaded.table())
        assert serial.verdict.kind == "axis-symmetric"

    def test_audit_in_report(self, radial_p2):
        """Passing a flux adds the audit bound to the report."""
        report = run_moving_plane(radial_p2, directions=2, lambdas=16, resolution=32,
                                  flux=_radial_p2_flux)
        assert report.audit is not None
        assert report.audit >= 0.0


def _report(k, n, center=(0.2, -0.1), symmetric=True, shift=0.0):
    t = 2 * np.pi * k / n
    e = (float(np.cos(t)), float(np.sin(t)))
    level = e[0] * center[0] + e[1] * center[1] + shift
    return DirectionReport(k, e, level, None, symmetric, level, level, 0.0, [])


class TestSymmetryVerdict:
    def test_concurrent_axes_are_radial(self):
        """Symmetric directions whose axes meet in one point give the center."""
        verdict = symmetry_verdict([_report(k, 8) for k in range(8)])
        assert verdict.kind == "radial"
        np.testing.assert_allclose(verdict.center, (0.2, -0.1), atol=1e-12)
        assert len(verdict.axes) == 4
        assert verdict.symmetric_directions == 8

    def test_one_failed_direction(self):
        """A single asymmetric direction demotes radial to axis symmetry."""
        reports = [_report(k, 8, symmetric=(k != 3)) for k in range(8)]
        verdict = symmetry_verdict(reports)
        assert verdict.kind == "axis-symmetric"
        assert verdict.center is None

    def test_axes_not_concurrent(self):
        """Shifted symmetry levels do not meet in a point."""
        reports = [_report(k, 8, shift=0.05 * (k % 2)) for k in range(8)]
        assert symmetry_verdict(reports).kind == "axis-symmetric"

    def test_too_few_directions(self):
        """Radial needs at least the minimum number of directions."""
        assert symmetry_verdict([_report(k, 4) for k in range(4)]).kind == "axis-symmetric"

    def test_no_symmetric_direction(self):
        """Nothing symmetric is asymmetric."""
        verdict = symmetry_verdict([_report(k, 8, symmetric=False) for k in range(8)])
        assert verdict.kind == "asymmetric"
        assert verdict.axes == []
