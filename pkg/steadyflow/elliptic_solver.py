"""Manufactured steady states: solve lap(psi) = F(psi) on disks.

Two solvers:

- ``solve_radial`` shoots the radial ODE psi'' + psi'/r = F(psi) from the
  center with an adaptive high-order Runge-Kutta method.
- ``solve_disk_newton`` runs Newton on a polar Chebyshev x Fourier
  collocation of the Dirichlet problem (the radial variable runs through
  the center, so no pole condition is needed).

Plus the two boundary diagnostics used on candidate stream functions:
the overdetermined Dirichlet/Neumann check and the two-sided distance
bound psi ~ dist^2.
"""
from dataclasses import dataclass, field as dc_field, replace
import logging
from typing import Callable, Optional, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial import chebyshev as C
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.linalg import toeplitz
from scipy.sparse.linalg import eigs, spsolve

from steadyflow.config import Tolerances
from steadyflow.errors import (ConvergenceError, DomainError, SignChangeError,
                               SolverError)
from steadyflow.fields import Domain, GridField, ScalarField, grid_nodes

logger = logging.getLogger(__name__)

SOLVE_MODES = ("radial-shoot", "disk-newton")
BLOW_UP = 1e8


# ===== Problem =====

@dataclass
class SemilinearProblem:
    """lap(psi) = F(psi) in ``domain`` with psi = ``boundary_value`` on the boundary.

    Attributes:
        flux: Vectorized F.
        flux_expr: Optional closed form of F (sympy, in the catalog symbol).
        support: Interval F is defined on; arguments are clipped into it.
        scale: Amplitude factor recorded by ``normalized``.
    """
    domain: Domain
    flux: Callable
    boundary_value: float = 0.0
    mode: str = "disk-newton"
    flux_expr: object = None
    support: Optional[Tuple[float, float]] = None
    scale: float = 1.0

    def __post_init__(self):
        if self.mode not in SOLVE_MODES:
            raise ValueError(f"mode must be one of {SOLVE_MODES}, got {self.mode!r}")
        if self.domain.kind != "disk":
            raise DomainError(f"semilinear problems are solved on disks, got {self.domain.kind}")

    def F(self, s):
        s = np.asarray(s, dtype=float)
        if self.support is not None:
            s = np.clip(s, *self.support)
        with np.errstate(invalid="ignore"):
            return np.broadcast_to(np.asarray(self.flux(s), dtype=float), s.shape).copy()

    def dF(self, s, span: float = 1.0):
        """F'(s) by central difference with step 1e-6 * span."""
        step = 1e-6 * max(span, 1e-12)
        return (self.F(np.asarray(s) + step) - self.F(np.asarray(s) - step)) / (2 * step)

    def linear_coefficient(self) -> Optional[float]:
        """c when F(s) = c s on a probe set, else None."""
        probe = np.linspace(-1.0, 1.0, 9)
        if self.support is not None:
            lo, hi = self.support
            probe = np.linspace(lo, hi, 9)
        vals = self.F(probe)
        if abs(float(self.F(0.0))) > 1e-12:
            return None
        c = np.polyfit(probe, vals, 1)[0]
        if np.max(np.abs(vals - c * probe)) > 1e-10 * max(1.0, abs(c)):
            return None
        return float(c)

    def normalized(self) -> "SemilinearProblem":
        """Rescale psi = c phi so that F takes the value 1 on the boundary.

        The new problem's ``scale`` records c; multiply its solution by
        ``scale`` to recover the original amplitude.
        """
        c = float(self.F(self.boundary_value))
        if c == 0.0:
            raise ValueError("F vanishes at the boundary value; cannot normalize F(0)=1")
        base = self.flux
        support = None if self.support is None else tuple(sorted((self.support[0] / c,
                                                                  self.support[1] / c)))
        return replace(self, flux=lambda t: base(c * np.asarray(t)) / c,
                       boundary_value=self.boundary_value / c, flux_expr=None,
                       support=support, scale=self.scale * c)


# ===== Radial shooting =====

@dataclass
class RadialProfile:
    r: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    psi0: float
    R: float
    boundary: dict
    solution: object = dc_field(default=None, repr=False)
    series: Optional[Tuple[float, float, float]] = None

    def __call__(self, r):
        return self._eval(r)[0]

    def derivative(self, r):
        return self._eval(r)[1]

    def _eval(self, r):
        r = np.asarray(r, dtype=float)
        if self.series is None:
            ys = self.solution(r.ravel())
            return ys[0].reshape(r.shape), ys[1].reshape(r.shape)
        r0, f0 = self.series[0], self.series[2]
        inner = r < r0
        ys = self.solution(np.clip(r, r0, None).ravel())
        psi = ys[0].reshape(r.shape).copy()
        dpsi = ys[1].reshape(r.shape).copy()
        psi[inner] = self.psi0 + f0 * r[inner] ** 2 / 4
        dpsi[inner] = f0 * r[inner] / 2
        return psi, dpsi


def integrate_radial(F: Callable, r_span: Tuple[float, float], psi_start: float,
                     dpsi_start: float, rtol: float = 1e-12, dense: bool = True):
    """Integrate psi'' = F(psi) - psi'/r over ``r_span`` (either direction).

    Raises:
        SolverError: Blow-up, or F returned non-finite values.
    """
    def rhs(r, y):
        return [y[1], float(F(y[0])) - y[1] / r]

    def blow_up(r, y):
        return BLOW_UP - abs(y[0])
    blow_up.terminal = True

    sol = solve_ivp(rhs, r_span, [psi_start, dpsi_start], method="DOP853", rtol=rtol,
                    atol=rtol * 1e-2, dense_output=dense, events=blow_up)
    if sol.status == 1:
        raise SolverError(f"radial solution blew up at r={sol.t_events[0][0]:.6g}")
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise SolverError(f"radial integration failed: {sol.message} "
                          "(F evaluated outside its domain?)")
    return sol


def solve_radial(problem: SemilinearProblem, psi0: float, R: Optional[float] = None,
                 samples: int = 513, tol: Optional[Tolerances] = None) -> RadialProfile:
    """Shoot from the center with psi(0) = psi0, psi'(0) = 0.

    The integration starts at r0 = 1e-4 R from the series
    psi = psi0 + F(psi0) r^2 / 4, whose truncation error is O(r0^4).
    """
    tol = tol or Tolerances()
    R = float(problem.domain.radius if R is None else R)
    f0 = float(problem.F(psi0))
    if not np.isfinite(f0):
        raise SolverError(f"F({psi0}) is not finite")
    r0 = 1e-4 * R
    sol = integrate_radial(problem.F, (r0, R), psi0 + f0 * r0 ** 2 / 4, f0 * r0 / 2,
                           rtol=tol.radial_rtol)
    r = np.linspace(0.0, R, samples)
    profile = RadialProfile(r, np.empty(0), np.empty(0), float(psi0), R, {}, sol.sol,
                            (r0, psi0, f0))
    profile.psi, profile.dpsi = profile._eval(r)
    psi_R, dpsi_R = float(profile.psi[-1]), float(profile.dpsi[-1])
    profile.boundary = {"psi": psi_R, "dpsi": dpsi_R,
                        "d2psi": float(problem.F(psi_R)) - dpsi_R / R}
    logger.info("Radial shot psi0=%.6g: psi(R)=%.3e psi'(R)=%.3e (%d steps)", psi0, psi_R,
                dpsi_R, sol.t.size)
    return profile


# ===== Polar spectral collocation =====

def cheb(N: int):
    """Chebyshev differentiation matrix and points cos(pi j / N), j = 0..N."""
    x = np.cos(np.pi * np.arange(N + 1) / N)
    c = np.hstack([2.0, np.ones(N - 1), 2.0]) * (-1.0) ** np.arange(N + 1)
    dX = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dX + np.eye(N + 1))
    D -= np.diag(D.sum(axis=1))
    return D, x


@dataclass
class PolarGrid:
    """Collocation nodes: positive Chebyshev radii times equispaced angles."""
    N: int
    M: int
    r: np.ndarray
    theta: np.ndarray
    laplacian: sparse.csr_matrix
    x_full: np.ndarray

    @classmethod
    def build(cls, nr: int, ntheta: int) -> "PolarGrid":
        if ntheta % 2:
            raise ValueError(f"ntheta must be even, got {ntheta}")
        N = 2 * nr + 1
        D, x = cheb(N)
        D2 = D @ D
        n2 = nr
        mirror = slice(N - 1, n2, -1)
        D1 = D2[1:n2 + 1, 1:n2 + 1]
        D2m = D2[1:n2 + 1, mirror]
        E1 = D[1:n2 + 1, 1:n2 + 1]
        E2 = D[1:n2 + 1, mirror]
        r = x[1:n2 + 1]
        M = ntheta
        dt = 2 * np.pi / M
        k = np.arange(1, M)
        col = np.hstack([-np.pi ** 2 / (3 * dt ** 2) - 1.0 / 6,
                         0.5 * (-1.0) ** (k + 1) / np.sin(dt * k / 2) ** 2])
        D2t = toeplitz(col)
        Rinv = np.diag(1.0 / r)
        half = M // 2
        Z = np.zeros((half, half))
        I = np.eye(half)
        swap = np.block([[Z, I], [I, Z]])
        L = (sparse.kron(D1 + Rinv @ E1, sparse.eye(M))
             + sparse.kron(D2m + Rinv @ E2, swap)
             + sparse.kron(Rinv @ Rinv, D2t))
        theta = dt * np.arange(M)
        return cls(N, M, r, theta, sparse.csr_matrix(L), x)


def _fourier_columns(ring_values, theta, deriv):
    """Trigonometric interpolant (and its theta derivatives) of each ring at ``theta``.

    ring_values has shape (rings, M); returns shape (points, rings).
    """
    M = ring_values.shape[1]
    coef = np.fft.fft(ring_values, axis=1) / M
    k = np.fft.fftfreq(M, 1.0 / M)
    nyq = M // 2
    k_main = np.where(np.abs(k) == nyq, 0, k)
    phase = np.exp(1j * np.outer(theta, k_main)) * (1j * k_main) ** deriv
    phase[:, np.abs(k) == nyq] = 0.0
    out = (phase @ coef.T).real
    c_nyq = coef[:, nyq].real
    # Nyquist mode as a cosine
    cos_d = np.real((1j * nyq) ** deriv * np.exp(1j * nyq * theta))
    out += np.outer(cos_d, c_nyq)
    return out


class PolarSpectralField(ScalarField):
    """Solution of the disk collocation problem, evaluated spectrally.

    Derivatives up to order two come from polar derivatives through the
    chain rule; use ``to_grid`` for higher-order work.
    """

    def __init__(self, grid: PolarGrid, values: np.ndarray, domain: Domain, boundary_value=0.0,
                 name="disk-solution", metadata=None):
        super().__init__(domain, 2, "grid", name, metadata)
        self.grid = grid
        self.values = np.asarray(values, dtype=float).reshape(len(grid.r), grid.M)
        self.boundary_value = float(boundary_value)
        N = grid.N
        # interpolation matrix from node values to Chebyshev coefficients
        self._to_coef = np.linalg.inv(C.chebvander(grid.x_full, N))
        self._dcoef = [np.eye(N + 1)]
        for _ in range(2):
            self._dcoef.append(np.vstack([C.chebder(self._dcoef[-1]), np.zeros((1, N + 1))]))

    def _columns(self, theta, deriv):
        n2 = len(self.grid.r)
        pos = _fourier_columns(self.values, theta, deriv)
        neg = _fourier_columns(self.values, theta + np.pi, deriv)
        cols = np.zeros((theta.size, self.grid.N + 1))
        cols[:, 1:n2 + 1] = pos
        cols[:, n2 + 1:self.grid.N] = neg[:, ::-1]
        return cols

    def polar_derivatives(self, r, theta):
        """u, u_r, u_rr, u_t, u_rt, u_tt at scaled radius r in [0, 1]."""
        V = C.chebvander(r, self.grid.N)
        out = {}
        for m in range(3):
            coef = self._columns(theta, m) @ self._to_coef.T
            for k in range(3 - m):
                out[(k, m)] = np.einsum("pi,pi->p", V, coef @ self._dcoef[k].T)
        return out

    def _derivative(self, alpha, x, y):
        shape = x.shape
        cx, cy = self.domain.center
        R = self.domain.radius
        dx = (x.ravel() - cx) / R
        dy = (y.ravel() - cy) / R
        r = np.maximum(np.hypot(dx, dy), 1e-9)
        t = np.arctan2(dy, dx)
        p = self.polar_derivatives(r, t)
        c, s = np.cos(t), np.sin(t)
        u_r, u_t = p[(1, 0)], p[(0, 1)]
        u_rr, u_rt, u_tt = p[(2, 0)], p[(1, 1)], p[(0, 2)]
        if alpha == (0, 0):
            out = p[(0, 0)] + self.boundary_value
        elif alpha == (1, 0):
            out = c * u_r - s / r * u_t
        elif alpha == (0, 1):
            out = s * u_r + c / r * u_t
        elif alpha == (2, 0):
            out = (c * c * u_rr + s * s / r * u_r + s * s / r ** 2 * u_tt
                   - 2 * c * s / r * u_rt + 2 * c * s / r ** 2 * u_t)
        elif alpha == (0, 2):
            out = (s * s * u_rr + c * c / r * u_r + c * c / r ** 2 * u_tt
                   + 2 * c * s / r * u_rt - 2 * c * s / r ** 2 * u_t)
        else:
            out = (c * s * u_rr - c * s / r * u_r - c * s / r ** 2 * u_tt
                   + (c * c - s * s) / r * u_rt - (c * c - s * s) / r ** 2 * u_t)
        out = out / R ** sum(alpha)
        return out.reshape(shape)

    def to_grid(self, resolution=256, margin: float = 0.05) -> GridField:
        """Cartesian samples; a thin band outside the disk holds the extrapolant."""
        x, y = grid_nodes(self.domain, resolution)
        XX, YY = np.meshgrid(x, y)
        cx, cy = self.domain.center
        rr = np.hypot(XX - cx, YY - cy) / self.domain.radius
        keep = rr <= 1 + margin
        values = np.full(XX.shape, np.nan)
        values[keep] = self(XX[keep], YY[keep])
        mask = rr > 1 + 1e-12
        return GridField(values, x, y, self.domain, mask=mask, name=f"{self.name}@grid",
                         metadata=self.metadata)


def solve_disk_newton(problem: SemilinearProblem, guess=None, nr: int = 20, ntheta: int = 40,
                      max_steps: int = 30, tol: Optional[Tolerances] = None) -> PolarSpectralField:
    """Newton on the polar collocation of lap(psi) = F(psi), psi = g on the boundary.

    A linear homogeneous F(s) = c s with zero boundary data is solved as the
    discrete eigenproblem nearest c, scaled to the guess amplitude. When F'
    is unbounded on the iterate range, damped Picard iteration takes over.

    Args:
        problem: The semilinear problem (disk domain).
        guess: ScalarField or callable (x, y) -> psi; zero when omitted.
        nr, ntheta: Radial and angular node counts.

    Raises:
        ConvergenceError: Newton and Picard both stagnate (carries the last residual).
    """
    tol = tol or Tolerances()
    grid = PolarGrid.build(nr, ntheta)
    cx, cy = problem.domain.center
    R = problem.domain.radius
    L = grid.laplacian / R ** 2
    RR, TT = np.meshgrid(grid.r, grid.theta, indexing="ij")
    px = (cx + R * RR * np.cos(TT)).ravel()
    py = (cy + R * RR * np.sin(TT)).ravel()
    g = float(problem.boundary_value)
    psi = np.full(px.size, g) if guess is None else np.asarray(guess(px, py), dtype=float)
    u = psi - g
    meta = {"nodes": int(u.size), "nr": nr, "ntheta": ntheta}

    c = problem.linear_coefficient()
    if c is not None and g == 0.0:
        vals, vecs = eigs(L.tocsc(), k=1, sigma=c)
        v = np.real(vecs[:, 0])
        amp = float(np.max(np.abs(u))) or 1.0
        ref = int(np.argmax(np.abs(u))) if np.any(u) else int(np.argmax(np.abs(v)))
        sign = np.sign(u[ref]) if np.any(u) else 1.0
        u = v * (sign * np.sign(v[ref])) * amp / np.max(np.abs(v))
        lam = float(np.real(vals[0]))
        meta.update(method="eigen", eigenvalue=lam, residual=float(np.max(np.abs(L @ u - c * u))))
        logger.info("Linear flux c=%.6g: discrete eigenvalue %.12g", c, lam)
        return PolarSpectralField(grid, u, problem.domain, g, "disk-eigen-solution", meta)

    def residual(v):
        return L @ v - problem.F(g + v)

    res = residual(u)
    norm = float(np.max(np.abs(res)))
    steps = 0
    method = "newton"
    while norm > tol.newton_tol and steps < max_steps:
        span = max(float(np.ptp(g + u)), 1e-3)
        slope = problem.dF(g + u, span)
        if not np.all(np.isfinite(slope)) or np.max(np.abs(slope)) > 1e8:
            method = "picard"
            break
        J = (L - sparse.diags(slope)).tocsc()
        du = spsolve(J, -res)
        step = 1.0
        while step > 1e-3:
            trial = u + step * du
            new_res = residual(trial)
            new_norm = float(np.max(np.abs(new_res)))
            if new_norm < norm or step < 2e-3:
                break
            step *= 0.5
        u, res, norm = trial, new_res, new_norm
        steps += 1
        logger.debug("Newton step %d: residual %.3e (damping %.3g)", steps, norm, step)

    if method == "picard":
        Lc = L.tocsc()
        for it in range(500):
            target = spsolve(Lc, problem.F(g + u))
            u = u + 0.5 * (target - u)
            res = residual(u)
            norm = float(np.max(np.abs(res)))
            steps += 1
            if norm <= tol.newton_tol:
                break
    if norm > tol.newton_tol:
        logger.error("Disk solve stagnated at residual %.3e after %d steps", norm, steps)
        raise ConvergenceError(f"{method} stagnated at residual {norm:.3e} after {steps} steps",
                               last_residual=norm)
    meta.update(method=method, steps=steps, residual=norm)
    logger.info("Disk %s converged in %d steps (residual %.3e)", method, steps, norm)
    return PolarSpectralField(grid, u, problem.domain, g, "disk-solution", meta)


# ===== Boundary diagnostics =====

@dataclass
class OverdeterminedReport:
    samples: int
    sup_value: float
    sup_gradient: float
    nn_mean: float
    nn_deviation: Optional[float]
    boundary_flux: Optional[float]
    table: pd.DataFrame = dc_field(repr=False)

    def passed(self, tol: float = 1e-10, nn_tol: float = 1e-6) -> bool:
        ok = self.sup_value <= tol and self.sup_gradient <= tol
        if self.nn_deviation is not None:
            ok = ok and self.nn_deviation <= nn_tol
        return ok


def overdetermined_check(psi: ScalarField, boundary, flux: Optional[Callable] = None,
                         count: int = 256) -> OverdeterminedReport:
    """psi, grad psi and the normal second derivative on boundary samples.

    Args:
        boundary: A ``Region`` (or anything with ``boundary_samples``), or a
            ``(points, normals)`` pair.
        flux: Optional F; when given, psi_nn is compared with F(boundary value).

    Raises:
        DomainError: The boundary provides no normals.
    """
    if hasattr(boundary, "boundary_samples"):
        pts, normals = boundary.boundary_samples(count)
    elif isinstance(boundary, tuple) and len(boundary) == 2:
        pts, normals = (np.asarray(b, dtype=float) for b in boundary)
    else:
        raise DomainError("boundary normals unavailable; pass a Region or (points, normals)")
    x, y = pts[:, 0], pts[:, 1]
    value = psi(x, y)
    gx, gy = psi.gradient(x, y)
    hxx, hxy, hyy = psi.hessian(x, y)
    nx_, ny_ = normals[:, 0], normals[:, 1]
    dnn = hxx * nx_ ** 2 + 2 * hxy * nx_ * ny_ + hyy * ny_ ** 2
    grad = np.hypot(gx, gy)
    table = pd.DataFrame({"x": x, "y": y, "nx": nx_, "ny": ny_, "psi": value,
                          "grad_norm": grad, "d_nn": dnn})
    deviation = boundary_flux = None
    if flux is not None:
        boundary_flux = float(np.asarray(flux(float(np.mean(value)))))
        deviation = float(np.max(np.abs(dnn - boundary_flux)))
    report = OverdeterminedReport(len(x), float(np.max(np.abs(value))), float(np.max(grad)),
                                  float(np.mean(dnn)), deviation, boundary_flux, table)
    logger.info("Overdetermined check on %d samples: |psi|=%.2e |grad|=%.2e psi_nn=%.6g",
                report.samples, report.sup_value, report.sup_gradient, report.nn_mean)
    return report


@dataclass
class DistanceBoundReport:
    C: float
    ratio_min: float
    ratio_max: float
    samples: int
    c_max: float

    @property
    def passed(self) -> bool:
        return self.C <= self.c_max


def distance_bound_check(psi: ScalarField, region, resolution: int = 128, layers: int = 8,
                         count: int = 256, tol: Optional[Tolerances] = None) -> DistanceBoundReport:
    """Smallest C >= 1 with dist^2 / C <= psi <= C dist^2 on interior samples.

    Samples are the region's interior grid plus boundary layers at
    geometrically shrinking distances along the normals.

    Raises:
        SignChangeError: psi is negative somewhere in the region.
    """
    tol = tol or Tolerances()
    gx, gy = region.interior_grid(resolution)
    pts, normals = region.boundary_samples(count)
    xmin, xmax, ymin, ymax = region.bounding_box()
    diam = float(np.hypot(xmax - xmin, ymax - ymin))
    extra = []
    for k in range(1, layers + 1):
        d = diam * 10.0 ** (-k)
        extra.append(pts - d * normals)
        extra.append(pts + d * normals)
    extra = np.vstack(extra)
    px = np.concatenate([gx, extra[:, 0]])
    py = np.concatenate([gy, extra[:, 1]])
    inside = region.contains(px, py)
    px, py = px[inside], py[inside]
    dist = region.boundary_distance(px, py)
    keep = dist > 1e-12 * diam
    px, py, dist = px[keep], py[keep], dist[keep]
    values = psi(px, py)
    scale = float(np.max(np.abs(values)))
    if np.any(values < -1e-14 * max(scale, 1.0)):
        raise SignChangeError(f"psi changes sign in {region.name} (min {values.min():.3e})")
    with np.errstate(divide="ignore"):
        ratio = values / dist ** 2
    rmin, rmax = float(np.min(ratio)), float(np.max(ratio))
    C_val = max(1.0, rmax, 1.0 / rmin if rmin > 0 else np.inf)
    report = DistanceBoundReport(C_val, rmin, rmax, int(px.size), tol.c_max)
    logger.info("Distance bound on %s: C=%.4g (ratio in [%.3g, %.3g])", region.name, C_val, rmin,
                rmax)
    return report
