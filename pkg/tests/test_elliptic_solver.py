"""Tests for the semilinear solvers and the boundary diagnostics."""
import os
import sys
import unittest

import numpy as np
import pytest
from scipy.special import j0, jn_zeros

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from steadyflow.catalog import catalog_field
from steadyflow.elliptic_solver import (SemilinearProblem, distance_bound_check,
                                        overdetermined_check, solve_disk_newton, solve_radial)
from steadyflow.errors import ConvergenceError, DomainError, SignChangeError, SolverError
from steadyflow.fields import Domain
from steadyflow.flux_relation import collect_pairs, extract_flux
from steadyflow.regions import Region

J01 = float(jn_zeros(0, 1)[0])
DISK = Domain.disk()


def _radial_p2_flux(s):
    return 8 - 16 * np.sqrt(s)


class TestProblem(unittest.TestCase):
    def test_mode_is_checked(self):
        """Unknown solve modes are refused."""
        with self.assertRaises(ValueError):
            SemilinearProblem(DISK, np.exp, mode="multigrid")

    def test_disk_only(self):
        """Problems live on disks."""
        with self.assertRaises(DomainError):
            SemilinearProblem(Domain.periodic_rectangle(), np.exp)

    def test_linear_coefficient(self):
        """A homogeneous linear F reports its slope."""
        self.assertAlmostEqual(SemilinearProblem(DISK, lambda s: -2.0 * s).linear_coefficient(), -2.0)
        self.assertIsNone(SemilinearProblem(DISK, lambda s: 1.0 + s).linear_coefficient())

    def test_normalized(self):
        """Normalization makes F equal one at the boundary value."""
        problem = SemilinearProblem(DISK, lambda s: 2.0 + np.asarray(s)).normalized()
        self.assertAlmostEqual(float(problem.F(0.0)), 1.0)
        self.assertAlmostEqual(float(problem.F(1.0)), 2.0)
        self.assertEqual(problem.scale, 2.0)

    def test_normalize_needs_nonzero_flux(self):
        """F(0) = 0 cannot be normalized."""
        with self.assertRaises(ValueError):
            SemilinearProblem(DISK, lambda s: np.asarray(s)).normalized()

    def test_support_clips(self):
        """Arguments are clipped into the support."""
        problem = SemilinearProblem(DISK, _radial_p2_flux, support=(0.0, 1.0))
        self.assertEqual(float(problem.F(-0.5)), 8.0)


class TestRadialShooting:
    def test_constant_flux(self):
        """lap psi = 1 gives psi0 + r²/4."""
        profile = solve_radial(SemilinearProblem(DISK, lambda s: np.ones_like(s), mode="radial-shoot"),
                               -0.25)
        assert profile.boundary["psi"] == pytest.approx(0.0, abs=1e-10)
        assert profile.boundary["dpsi"] == pytest.approx(0.5, abs=1e-10)
        assert float(profile(0.5)) == pytest.approx(-0.25 + 0.0625, abs=1e-10)

    def test_radial_poly_profile(self):
        """Shooting 8 - 16 sqrt(s) from psi0 = 1 traces (1 - r²)²."""
        problem = SemilinearProblem(DISK, _radial_p2_flux, mode="radial-shoot", support=(0.0, 1.0))
        profile = solve_radial(problem, 1.0)
        r = np.array([0.0, 0.25, 0.5, 0.75])
        np.testing.assert_allclose(profile(r), (1 - r ** 2) ** 2, atol=1e-8)

    def test_blow_up(self):
        """Superlinear growth ends in a solver error."""
        problem = SemilinearProblem(Domain.disk(radius=10.0), lambda s: np.asarray(s) ** 3,
                                    mode="radial-shoot")
        with pytest.raises(SolverError):
            solve_radial(problem, 10.0)


class TestDiskNewton:
    def test_constant_flux(self):
        """lap psi = 1 with zero boundary data is (r² - 1)/4."""
        sol = solve_disk_newton(SemilinearProblem(DISK, lambda s: np.ones_like(s)))
        assert float(sol(0.3, 0.4)) == pytest.approx(-0.1875, abs=1e-10)
        assert sol.metadata["method"] == "newton"

    def test_eigen_path(self):
        """Linear homogeneous F is solved as the nearest eigenproblem."""
        problem = SemilinearProblem(DISK, lambda s: -J01 ** 2 * np.asarray(s))
        sol = solve_disk_newton(problem, guess=lambda x, y: 1 - x ** 2 - y ** 2)
        assert sol.metadata["method"] == "eigen"
        assert sol.metadata["eigenvalue"] == pytest.approx(-J01 ** 2, abs=1e-8)
        ratio = float(sol(0.5, 0.0)) / float(sol(0.0, 0.0))
        assert ratio == pytest.approx(float(j0(0.5 * J01)), abs=1e-8)

    def test_agrees_with_shooting(self):
        """Newton on lap psi = exp(psi) matches the radial shot from its center value."""
        problem = SemilinearProblem(DISK, np.exp)
        sol = solve_disk_newton(problem)
        center = float(sol(0.0, 0.0))
        assert center < 0
        assert float(sol(0.3, 0.0)) == pytest.approx(float(sol(0.0, 0.3)), abs=1e-9)
        profile = solve_radial(problem, center)
        assert profile.boundary["psi"] == pytest.approx(0.0, abs=1e-7)

    def test_square_root_flux(self):
        """lap psi = 8 - 16 sqrt(psi) converges quickly to (1 - r²)²."""
        problem = SemilinearProblem(DISK, _radial_p2_flux, support=(0.0, 1.0))
        sol = solve_disk_newton(problem, guess=lambda x, y: 0.95 * (1 - x ** 2 - y ** 2) ** 2)
        assert sol.metadata["method"] == "newton"
        assert sol.metadata["steps"] <= 5
        x = np.array([0.0, 0.3, -0.5, 0.1, 0.7])
        y = np.array([0.0, 0.4, 0.2, -0.9, -0.6])
        np.testing.assert_allclose(sol(x, y), (1 - x ** 2 - y ** 2) ** 2, atol=1e-8)

    def test_solution_gives_back_its_flux(self):
        """The relation extracted from the solution of lap psi = exp(psi) is exp."""
        sol = solve_disk_newton(SemilinearProblem(DISK, np.exp))
        samples = collect_pairs(sol, levels=48, resolution=128)
        flux = extract_flux(samples, residual=sol.metadata["residual"])
        a, b = samples.value_range
        s = a + (b - a) * np.linspace(0.05, 0.95, 19)
        np.testing.assert_allclose(flux(s), np.exp(s), atol=1e-5)

    def test_stagnation(self):
        """Running out of steps raises with the last residual."""
        with pytest.raises(ConvergenceError):
            solve_disk_newton(SemilinearProblem(DISK, np.exp), max_steps=0)

    def test_odd_angular_count(self):
        """The angular node count must be even."""
        with pytest.raises(ValueError):
            solve_disk_newton(SemilinearProblem(DISK, np.exp), ntheta=41)


class TestBoundaryDiagnostics:
    def test_overdetermined_radial_poly(self):
        """(1 - r²)² meets both boundary conditions with psi_nn = F(0)."""
        psi = catalog_field("radial-poly", {"p": 2})
        report = overdetermined_check(psi, Region.from_domain(psi.domain), flux=_radial_p2_flux)
        assert report.sup_value <= 1e-10
        assert report.sup_gradient <= 1e-10
        assert report.nn_deviation <= 1e-6
        assert report.passed()
        assert len(report.table) == report.samples

    def test_overdetermined_control(self):
        """The disk eigenfunction has a nonzero normal derivative."""
        psi = catalog_field("disk-eigen")
        assert not overdetermined_check(psi, Region.from_domain(psi.domain)).passed()

    def test_overdetermined_needs_normals(self):
        """A bare point list has no normals."""
        with pytest.raises(DomainError):
            overdetermined_check(catalog_field("radial-poly"), np.zeros((4, 2)))

    def test_distance_bound(self):
        """(1 - r²)² sits between dist² and 4 dist²."""
        psi = catalog_field("radial-poly", {"p": 2})
        report = distance_bound_check(psi, Region.from_domain(psi.domain))
        assert report.C <= 4.1
        assert report.passed

    def test_distance_bound_control(self):
        """1 - r² decays only linearly at the boundary."""
        psi = catalog_field("polynomial", {"expr": "1 - x**2 - y**2"})
        report = distance_bound_check(psi, Region.from_domain(psi.domain))
        assert report.C > 1e6
        assert not report.passed

    def test_sign_change(self):
        """A field that changes sign has no distance bound."""
        psi = catalog_field("perturbed-radial")
        with pytest.raises(SignChangeError):
            distance_bound_check(psi, Region.from_domain(psi.domain))


if __name__ == '__main__':
    unittest.main()
