"""Series flow with vorticity 2 + psi^(5/2) inside a Jordan curve and 2 - psi^(5/2) outside.

The stream function is built on a tube |n| <= delta around the curve in
Fermi coordinates (s arclength, n signed distance along the outward
normal). With psi = n^2 P(s, n), both one-sided equations collapse into

    lap(psi) = 2 - n^5 P^(5/2)

which is analytic in n. Multiplying the Fermi Laplacian by h^3 (h = 1 + kappa n)
turns each power of n into an explicit formula for the next coefficient,
so the series is computed order by order on a uniform arclength grid and
certified afterwards by its PDE residual and coefficient decay.
"""
from dataclasses import dataclass, field as dc_field
import logging
from math import factorial
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import sympy as sp
from scipy.spatial import cKDTree

from steadyflow.config import Tolerances
from steadyflow.elliptic_solver import RadialProfile, integrate_radial
from steadyflow.errors import ChartError, DomainError, SeriesObstructionError
from steadyflow.fields import Domain, ScalarField

logger = logging.getLogger(__name__)

EXPONENT = 2.5
DENSE_SAMPLES = 2048
NEWTON_STEPS = 8


# ===== Curves =====

class JordanCurve:
    """Closed curve x(t), y(t) given by finite Fourier sums, t in [0, 2 pi).

    Coefficient arrays are indexed by mode k: x(t) = sum ax[k] cos kt + bx[k] sin kt.
    Clockwise input is reversed so the curve is always counterclockwise.
    """

    def __init__(self, ax, bx, ay, by, name="fourier"):
        self.ax, self.bx, self.ay, self.by = (np.asarray(c, dtype=float) for c in (ax, bx, ay, by))
        self.k = np.arange(self.ax.size)
        self.name = name
        if self._signed_area() < 0:
            self.bx, self.by = -self.bx, -self.by
        self._arclength_table()

    @classmethod
    def circle(cls, radius=1.0, center=(0.0, 0.0)):
        return cls([center[0], radius], [0.0, 0.0], [center[1], 0.0], [0.0, radius], "circle")

    @classmethod
    def ellipse(cls, a=1.3, b=0.8, center=(0.0, 0.0)):
        if a <= 0 or b <= 0:
            raise ValueError(f"ellipse semi-axes must be positive, got a={a}, b={b}")
        return cls([center[0], a], [0.0, 0.0], [center[1], 0.0], [0.0, b], "ellipse")

    @classmethod
    def from_file(cls, path):
        """CSV with columns k, ax, bx, ay, by (missing modes are zero)."""
        table = pd.read_csv(Path(path))
        missing = {"k", "ax", "bx", "ay", "by"} - set(table.columns)
        if missing:
            raise ValueError(f"curve file {path} lacks columns {sorted(missing)}")
        modes = int(table["k"].max()) + 1
        coef = {c: np.zeros(modes) for c in ("ax", "bx", "ay", "by")}
        for _, row in table.iterrows():
            for c in coef:
                coef[c][int(row["k"])] = float(row[c])
        return cls(coef["ax"], coef["bx"], coef["ay"], coef["by"], Path(path).stem)

    # -- parameter space --
    def at_t(self, t, deriv=0):
        """d^deriv/dt^deriv of (x, y) at parameters t; returns shape (len(t), 2)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        kt = np.outer(t, self.k) + deriv * np.pi / 2
        scale = self.k.astype(float) ** deriv
        cos, sin = np.cos(kt) * scale, np.sin(kt) * scale
        x = cos @ self.ax + sin @ self.bx
        y = cos @ self.ay + sin @ self.by
        return np.column_stack([x, y])

    def speed(self, t):
        d = self.at_t(t, 1)
        return np.hypot(d[:, 0], d[:, 1])

    def frame_t(self, t):
        """Unit tangent and outward unit normal at parameters t."""
        d = self.at_t(t, 1)
        T = d / np.hypot(d[:, 0], d[:, 1])[:, None]
        return T, np.column_stack([T[:, 1], -T[:, 0]])

    def curvature_t(self, t):
        d1, d2 = self.at_t(t, 1), self.at_t(t, 2)
        cross = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        return cross / np.hypot(d1[:, 0], d1[:, 1]) ** 3

    def _signed_area(self):
        t = 2 * np.pi * np.arange(512) / 512
        p, d = self.at_t(t), self.at_t(t, 1)
        return 0.5 * float(np.mean(p[:, 0] * d[:, 1] - p[:, 1] * d[:, 0])) * 2 * np.pi

    def _arclength_table(self, nf=1024):
        t = 2 * np.pi * np.arange(nf) / nf
        hat = np.fft.fft(self.speed(t)) / nf
        modes = np.fft.fftfreq(nf, 1.0 / nf)
        keep = (np.abs(hat) > 1e-17 * abs(hat[0])) & (modes != 0) & (np.abs(modes) < nf // 2)
        self._sigma0 = float(hat[0].real)
        self._smodes = modes[keep]
        self._shat = hat[keep]
        self.length = 2 * np.pi * self._sigma0

    def s_of_t(self, t):
        """Arclength from t = 0, integrated spectrally."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = self._smodes
        osc = (np.exp(1j * np.outer(t, k)) - 1.0) @ (self._shat / (1j * k))
        return self._sigma0 * t + osc.real

    def t_of_s(self, s):
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.length)
        t = 2 * np.pi * s / self.length
        for _ in range(NEWTON_STEPS):
            t = t - (self.s_of_t(t) - s) / self.speed(t)
        return t

    # -- arclength space --
    def point(self, s):
        return self.at_t(self.t_of_s(s))

    def tangent(self, s):
        return self.frame_t(self.t_of_s(s))[0]

    def normal(self, s):
        return self.frame_t(self.t_of_s(s))[1]

    def curvature(self, s):
        return self.curvature_t(self.t_of_s(s))

    def max_curvature(self, samples=4096):
        t = 2 * np.pi * np.arange(samples) / samples
        return float(np.max(np.abs(self.curvature_t(t))))

    def describe(self) -> dict:
        return {"name": self.name, "modes": int(self.k.size - 1), "length": self.length}


def _self_intersects(points: np.ndarray) -> bool:
    a = points
    b = np.roll(points, -1, axis=0)

    def orient(p, q, r):
        return np.sign((q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1])
                       - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0]))
    A, B = a[:, None, :], b[:, None, :]
    Cc, D = a[None, :, :], b[None, :, :]
    cross = (orient(A, B, Cc) * orient(A, B, D) < 0) & (orient(Cc, D, A) * orient(Cc, D, B) < 0)
    n = len(points)
    idx = np.arange(n)
    near = np.abs(idx[:, None] - idx[None, :])
    cross[(near <= 1) | (near >= n - 1)] = False
    return bool(np.any(cross))


# ===== Fermi chart =====

@dataclass
class FermiChart:
    """(s, n) -> gamma(s) + n nu(s) on the tube |n| <= delta.

    ``n < 0`` is the interior side of the curve, ``n > 0`` the exterior.
    """
    curve: JordanCurve
    delta: float
    _tree: cKDTree = dc_field(default=None, repr=False)
    _t_dense: np.ndarray = dc_field(default=None, repr=False)

    def __post_init__(self):
        self._t_dense = 2 * np.pi * np.arange(DENSE_SAMPLES) / DENSE_SAMPLES
        self._tree = cKDTree(self.curve.at_t(self._t_dense))

    def to_xy(self, s, n):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        n = np.atleast_1d(np.asarray(n, dtype=float))
        t = self.curve.t_of_s(s)
        _, nu = self.curve.frame_t(t)
        return self.curve.at_t(t) + n[:, None] * nu

    def to_fermi(self, x, y, return_t=False):
        """Nearest-point projection: (s, n) for Cartesian points (shape preserved)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        p = np.column_stack([np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()])
        _, idx = self._tree.query(p)
        t = self._t_dense[idx]
        with np.errstate(all="ignore"):
            for _ in range(NEWTON_STEPS):
                g0, g1, g2 = self.curve.at_t(t), self.curve.at_t(t, 1), self.curve.at_t(t, 2)
                r = p - g0
                g = np.einsum("ij,ij->i", r, g1)
                dg = -np.einsum("ij,ij->i", g1, g1) + np.einsum("ij,ij->i", r, g2)
                step = np.where(np.abs(dg) > 1e-14, g / dg, 0.0)
                t = t - step
            t = np.mod(t, 2 * np.pi)
            _, nu = self.curve.frame_t(t)
            r = p - self.curve.at_t(t)
            # unconverged projections never report a smaller distance
            n = np.copysign(np.hypot(r[:, 0], r[:, 1]), np.einsum("ij,ij->i", r, nu))
        s = np.mod(self.curve.s_of_t(t), self.curve.length)
        out = (s.reshape(shape), n.reshape(shape))
        return out + (t.reshape(shape),) if return_t else out

    def bounding_box(self):
        pts = np.vstack([self.offset_curve(self.delta, 1024), self.offset_curve(-self.delta, 1024)])
        pad = 1e-9 * float(np.ptp(pts))
        return (float(pts[:, 0].min()) - pad, float(pts[:, 0].max()) + pad,
                float(pts[:, 1].min()) - pad, float(pts[:, 1].max()) + pad)

    def offset_curve(self, n, count=1024):
        s = self.curve.length * np.arange(count) / count
        return self.to_xy(s, np.full(count, float(n)))


def build_fermi_chart(curve: JordanCurve, delta: float, tol: Optional[Tolerances] = None) -> FermiChart:
    """Fermi chart of half-width ``delta`` around ``curve``.

    Raises:
        ChartError: delta * max|kappa| exceeds the chart margin, the curve
            crosses itself, or distant arcs come closer than 2 delta.
    """
    tol = tol or Tolerances()
    if not delta > 0:
        raise ChartError(f"delta must be positive, got {delta}")
    kmax = curve.max_curvature()
    if delta * kmax > tol.chart_margin:
        raise ChartError(f"delta={delta} violates injectivity: delta*max|kappa|={delta * kmax:.3g} "
                         f"> {tol.chart_margin}")
    t = 2 * np.pi * np.arange(512) / 512
    pts = curve.at_t(t)
    if _self_intersects(pts):
        raise ChartError("curve intersects itself")
    s = curve.s_of_t(t)
    for i, j in cKDTree(pts).query_pairs(2 * delta):
        arc = abs(s[i] - s[j])
        if min(arc, curve.length - arc) > np.pi * delta:
            raise ChartError(f"tube of half-width {delta} overlaps itself")
    chart = FermiChart(curve, float(delta))
    logger.info("Fermi chart around %s: delta=%.4g, length=%.6g, max curvature %.4g",
                curve.name, delta, curve.length, kmax)
    return chart


# ===== Series in (s, n) =====

class FermiSeries:
    """sum_k c_k(s) n^k with each c_k a truncated Fourier series in arclength."""

    def __init__(self, values: np.ndarray, length: float, modes: int):
        values = np.atleast_2d(values)
        ng = values.shape[1]
        hat = np.fft.fft(values, axis=1) / ng
        m = np.fft.fftfreq(ng, 1.0 / ng)
        keep = (np.abs(m) <= modes) & (np.abs(m) < ng / 2)
        self.hat = hat[:, keep]
        self.omega = 2 * np.pi * m[keep] / length
        self.order = values.shape[0] - 1

    def coefficients(self, s, ds=0):
        """(points, order + 1) array of d^ds c_k / ds^ds."""
        E = np.exp(1j * np.outer(s, self.omega)) * (1j * self.omega) ** ds
        return (E @ self.hat.T).real

    def partials(self, s, n, max_order=2) -> Dict[Tuple[int, int], np.ndarray]:
        """Partials d_s^i d_n^j for i + j <= max_order."""
        k = np.arange(self.order + 1)
        out = {}
        for i in range(max_order + 1):
            C = self.coefficients(s, i)
            for j in range(max_order + 1 - i):
                fall = np.array([factorial(kk) / factorial(kk - j) if kk >= j else 0.0 for kk in k])
                powers = n[:, None] ** np.maximum(k - j, 0)
                out[(i, j)] = np.sum(C * fall * powers, axis=1)
        return out


class _Spectral:
    """Uniform arclength grid with truncation and differentiation."""

    def __init__(self, length: float, modes: int):
        self.ng = max(4 * modes, 16)
        self.modes = modes
        self.s = length * np.arange(self.ng) / self.ng
        m = np.fft.fftfreq(self.ng, 1.0 / self.ng)
        self.keep = (np.abs(m) <= modes) & (np.abs(m) < self.ng / 2)
        self.nyquist = np.abs(m) == self.ng // 2
        self.ik = 1j * 2 * np.pi * m / length

    def filter(self, v):
        hat = np.fft.fft(v)
        hat[~self.keep] = 0.0
        return np.fft.ifft(hat).real

    def ds(self, v, order=1):
        hat = np.fft.fft(v) * self.ik ** order
        hat[self.nyquist] = 0.0
        return np.fft.ifft(hat).real


@dataclass
class TubeSeriesSolution:
    chart: FermiChart
    orders: Tuple[int, int]
    s_nodes: np.ndarray
    coefficients: np.ndarray
    lhs: np.ndarray
    kappa: np.ndarray
    residual: dict = dc_field(default_factory=dict)
    decay: Tuple[float, float] = (np.nan, np.nan)

    @property
    def psi_series(self) -> FermiSeries:
        return FermiSeries(self.coefficients, self.chart.curve.length, self.orders[1])

    @property
    def lhs_series(self) -> FermiSeries:
        # products with kappa carry modes beyond Ns; keep every resolved mode
        return FermiSeries(self.lhs, self.chart.curve.length, self.ng // 2)

    @property
    def kappa_series(self) -> FermiSeries:
        return FermiSeries(self.kappa[None, :], self.chart.curve.length, self.ng // 2)

    @property
    def ng(self) -> int:
        return self.s_nodes.size

    def psi(self, s, n):
        return self.psi_series.partials(np.atleast_1d(s), np.atleast_1d(n), 0)[(0, 0)]

    def vorticity(self, s, n):
        """lap(psi) in Fermi coordinates, lhs / h^3."""
        s, n = np.atleast_1d(s), np.atleast_1d(n)
        E = self.lhs_series.partials(s, n, 0)[(0, 0)]
        kap = self.kappa_series.coefficients(s)[:, 0]
        return E / (1 + kap * n) ** 3

    def coefficient_table(self) -> pd.DataFrame:
        """Columns k, mode, real, imag of each c_k (nonnegative modes)."""
        rows = []
        for k, c in enumerate(self.coefficients):
            hat = np.fft.rfft(c) / self.ng
            for mode in range(min(self.orders[1], hat.size - 1) + 1):
                rows.append((k, mode, float(hat[mode].real), float(hat[mode].imag)))
        return pd.DataFrame(rows, columns=["k", "mode", "real", "imag"])


def _power_series(p: List[np.ndarray], alpha: float, count: int) -> List[np.ndarray]:
    """Coefficients of (sum p_k n^k)^alpha by the J.C.P. Miller recurrence."""
    q = [p[0] ** alpha]
    for m in range(1, count):
        acc = np.zeros_like(p[0])
        for k in range(1, min(m, len(p) - 1) + 1):
            acc = acc + ((alpha + 1) * k - m) * p[k] * q[m - k]
        q.append(acc / (m * p[0]))
    return q


def solve_tube_series(chart: FermiChart, orders=(16, 48), tol: Optional[Tolerances] = None) -> TubeSeriesSolution:
    """Coefficients c_2..c_Nn of psi = sum c_k(s) n^k, order by order.

    The power n^m of the h^3-multiplied equation
    h^3 psi_nn + kappa h^2 psi_n + h psi_ss - kappa' n psi_s = h^3 (2 - n^5 P^(5/2))
    contains c_{m+2} only through (m+2)(m+1) c_{m+2}, so each step is an
    explicit division. Products are formed on the arclength grid and each
    new coefficient is truncated to ``Ns`` Fourier modes.

    Raises:
        SeriesObstructionError: A coefficient turned non-finite.
    """
    tol = tol or Tolerances()
    nn, ns = int(orders[0]), int(orders[1])
    if nn < 6:
        raise ValueError(f"Nn must be at least 6, got {nn}")
    if ns < 1:
        raise ValueError(f"Ns must be at least 1, got {ns}")
    curve = chart.curve
    grid = _Spectral(curve.length, ns)
    kap = curve.curvature(grid.s)
    kap_s = grid.ds(kap)
    H3 = [np.ones_like(kap), 3 * kap, 3 * kap ** 2, kap ** 3]
    H2 = [np.ones_like(kap), 2 * kap, kap ** 2]
    zero = np.zeros_like(kap)
    c = [zero.copy() for _ in range(nn + 1)]
    dc = [zero.copy() for _ in range(nn + 1)]
    ddc = [zero.copy() for _ in range(nn + 1)]

    def get(arr, k):
        return arr[k] if 2 <= k <= nn else zero

    def lhs_without_top(m, include_top=False):
        acc = zero.copy()
        for i in range(0 if include_top else 1, 4):
            k = m - i + 2
            acc = acc + H3[i] * k * (k - 1) * get(c, k)
        for i in range(3):
            k = m - i + 1
            acc = acc + kap * H2[i] * k * get(c, k)
        acc = acc + get(ddc, m) + kap * get(ddc, m - 1) - kap_s * get(dc, m - 1)
        return acc

    q: List[np.ndarray] = []
    for m in range(nn - 1):
        rhs = 2 * H3[m] if m <= 3 else zero.copy()
        for i in range(4):
            j = m - 5 - i
            if j >= 0:
                rhs = rhs - H3[i] * q[j]
        top = grid.filter((rhs - lhs_without_top(m)) / ((m + 2) * (m + 1)))
        if not np.all(np.isfinite(top)):
            raise SeriesObstructionError(f"coefficient c_{m + 2} is not finite")
        c[m + 2] = top
        dc[m + 2] = grid.ds(top)
        ddc[m + 2] = grid.ds(top, 2)
        # q_m needs p_0..p_m = c_2..c_{m+2}
        q = _power_series(c[2:m + 3], EXPONENT, m + 1)
    lhs = np.array([lhs_without_top(m, include_top=True) for m in range(nn + 2)])
    solution = TubeSeriesSolution(chart, (nn, ns), grid.s, np.array(c), lhs, kap)
    solution.residual = series_residual(solution)
    norms = np.array([np.max(np.abs(ck)) for ck in c[2:]])
    ks = np.arange(2, nn + 1)
    good = norms > 1e-300
    if np.count_nonzero(good) >= 2:
        slope, intercept = np.polyfit(ks[good], np.log(norms[good]), 1)
        solution.decay = (float(np.exp(intercept)), float(np.exp(-slope)))
    logger.info("Tube series (Nn=%d, Ns=%d): residual %.3e on |n|<=delta/2, decay rho=%.3g",
                nn, ns, solution.residual["inner_sup"], solution.decay[1])
    return solution


def series_residual(solution: TubeSeriesSolution, ns: int = 128, nn: int = 17) -> dict:
    """PDE residual on the inner and outer halves of the tube, per side."""
    chart = solution.chart
    d = chart.delta
    s = chart.curve.length * np.arange(ns) / ns
    out = {}
    for label, lo, hi in (("inner", 0.0, d / 2), ("outer", d / 2, d)):
        mags = np.linspace(lo, hi, nn)
        S, Nabs = np.meshgrid(s, mags)
        sides = {}
        for side, sign in (("interior", -1.0), ("exterior", 1.0)):
            N = sign * Nabs
            psi = solution.psi(S.ravel(), N.ravel())
            omega = solution.vorticity(S.ravel(), N.ravel())
            target = 2.0 - sign * np.maximum(psi, 0.0) ** EXPONENT
            sides[side] = float(np.max(np.abs(omega - target)))
        out[f"{label}_sup"] = max(sides.values())
        out[f"{label}_interior"] = sides["interior"]
        out[f"{label}_exterior"] = sides["exterior"]
    # chart round trip on a 64 x 16 probe grid
    S, N = np.meshgrid(chart.curve.length * np.arange(64) / 64, np.linspace(-d, d, 16))
    xy = chart.to_xy(S.ravel(), N.ravel())
    s2, n2 = chart.to_fermi(xy[:, 0], xy[:, 1])
    back = chart.to_xy(s2, n2)
    out["chart_roundtrip"] = float(np.max(np.linalg.norm(back - xy, axis=1)))
    out["c2_deviation"] = float(np.max(np.abs(solution.coefficients[2] - 1.0)))
    out["boundary_value"] = float(np.max(np.abs(solution.coefficients[0])))
    out["boundary_slope"] = float(np.max(np.abs(solution.coefficients[1])))
    higher = [np.max(np.abs(np.fft.rfft(ck)[1:])) / solution.ng for ck in solution.coefficients]
    out["max_nonconstant_mode"] = float(max(higher))
    return out


# ===== Exported fields =====

class FermiField(ScalarField):
    """Field given by its (s, n) partials, with Cartesian derivatives to order two.

    ``partials(s, n, order)`` returns d_s^i d_n^j for i + j <= order. Values
    outside the tube are NaN; point queries through
    ``steadyflow.fields.derivative`` raise instead.
    """

    def __init__(self, chart: FermiChart, partials, kappa: FermiSeries, domain: Domain, name: str,
                 metadata=None):
        super().__init__(domain, 2, "series", name, metadata)
        self.chart = chart
        self.kappa = kappa
        self._partials = partials

    def _derivative(self, alpha, x, y):
        shape = x.shape
        s, n, t = self.chart.to_fermi(x.ravel(), y.ravel(), return_t=True)
        out = np.full(s.shape, np.nan)
        inside = np.abs(n) <= self.chart.delta * (1 + 1e-9)
        if not np.any(inside):
            return out.reshape(shape)
        s, n, t = s[inside], n[inside], t[inside]
        order = sum(alpha)
        P = self._partials(s, n, order)
        if order == 0:
            out[inside] = P[(0, 0)]
            return out.reshape(shape)
        T, nu = self.chart.curve.frame_t(t)
        kap = self.kappa.coefficients(s, 0)[:, 0]
        h = 1 + kap * n
        if order == 1:
            grad = P[(0, 1)][:, None] * nu + (P[(1, 0)] / h)[:, None] * T
            out[inside] = grad[:, 0] if alpha == (1, 0) else grad[:, 1]
            return out.reshape(shape)
        kap_s = self.kappa.coefficients(s, 1)[:, 0]
        A = P[(0, 2)]
        B = P[(1, 1)] / h - P[(1, 0)] * kap / h ** 2
        D = (P[(0, 1)] * kap + P[(2, 0)] / h - P[(1, 0)] * kap_s * n / h ** 2) / h
        i, j = (0, 0) if alpha == (2, 0) else (1, 1) if alpha == (0, 2) else (0, 1)
        out[inside] = (A * nu[:, i] * nu[:, j] + B * (T[:, i] * nu[:, j] + nu[:, i] * T[:, j])
                       + D * T[:, i] * T[:, j])
        return out.reshape(shape)


class TubeField(FermiField):
    """The exported series stream function; its Laplacian is the exact Fermi Laplacian."""

    def __init__(self, solution: TubeSeriesSolution, name="counterexample", metadata=None):
        chart = solution.chart
        series = solution.psi_series
        super().__init__(chart, lambda s, n, k: series.partials(s, n, k), solution.kappa_series,
                         Domain.jordan_tube(chart), name, metadata)
        self.solution = solution

    def laplacian(self) -> FermiField:
        E = self.solution.lhs_series
        kappa = self.kappa

        def partials(s, n, order):
            e = E.partials(s, n, order)
            k = [kappa.coefficients(s, i)[:, 0] for i in range(order + 1)]
            h = 1 + k[0] * n
            hp = {(0, 0): h, (1, 0): (k[1] * n if order >= 1 else None), (0, 1): k[0],
                  (2, 0): (k[2] * n if order >= 2 else None), (1, 1): (k[1] if order >= 1 else None),
                  (0, 2): np.zeros_like(h)}
            # u = h^-3 and its partials
            u = {(0, 0): h ** -3}
            if order >= 1:
                u[(1, 0)] = -3 * h ** -4 * hp[(1, 0)]
                u[(0, 1)] = -3 * h ** -4 * hp[(0, 1)]
            if order >= 2:
                u[(2, 0)] = 12 * h ** -5 * hp[(1, 0)] ** 2 - 3 * h ** -4 * hp[(2, 0)]
                u[(1, 1)] = 12 * h ** -5 * hp[(1, 0)] * hp[(0, 1)] - 3 * h ** -4 * hp[(1, 1)]
                u[(0, 2)] = 12 * h ** -5 * hp[(0, 1)] ** 2
            out = {}
            for (i, j) in e:
                total = np.zeros_like(h)
                for a in range(i + 1):
                    for b in range(j + 1):
                        w = factorial(i) // (factorial(a) * factorial(i - a)) \
                            * factorial(j) // (factorial(b) * factorial(j - b))
                        total = total + w * e[(a, b)] * u[(i - a, j - b)]
                out[(i, j)] = total
            return out
        return FermiField(self.chart, partials, kappa, self.domain, f"lap({self.name})",
                          {"source": "fermi-laplacian"})


def export_field(solution: TubeSeriesSolution, accept: float = 1e-6) -> TubeField:
    """ScalarField on the jordan-tube domain backed by the series."""
    if solution.residual.get("inner_sup", 0.0) > accept:
        logger.warning("Exporting series with inner residual %.3e above %.1e",
                       solution.residual["inner_sup"], accept)
    meta = {
        "steady": True,
        "boundary_value": 0.0,
        "branch_fluxes": {"interior": "2 + s**(5/2)", "exterior": "2 - s**(5/2)"},
        "curve": solution.chart.curve.describe(),
        "delta": solution.chart.delta,
        "orders": list(solution.orders),
        "residual": dict(solution.residual),
    }
    return TubeField(solution, metadata=meta)


def build_counterexample_field(curve="ellipse", a=1.3, b=0.8, delta=0.2, nn=16, ns=48,
                               tol: Optional[Tolerances] = None) -> TubeField:
    """Curve by name ('circle', 'ellipse') or a Fourier CSV path, then chart, series and field.

    The circle is the unit circle; ``a`` and ``b`` are the ellipse semi-axes.
    """
    if curve == "circle":
        jc = JordanCurve.circle()
    elif curve == "ellipse":
        jc = JordanCurve.ellipse(a, b)
    else:
        path = Path(curve)
        if not path.exists():
            raise DomainError(f"curve must be 'circle', 'ellipse' or a Fourier CSV file, got {curve!r}")
        jc = JordanCurve.from_file(path)
    chart = build_fermi_chart(jc, delta, tol)
    return export_field(solve_tube_series(chart, (nn, ns), tol))


# ===== Circle oracles =====

def circular_oracle(delta: float = 0.3, rtol: float = 1e-12) -> Tuple[RadialProfile, RadialProfile]:
    """One-sided radial solves from r = 1 with psi = psi' = 0.

    Inward (r < 1) uses lap(psi) = 2 + psi^(5/2); outward uses 2 - psi^(5/2).
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    profiles = []
    for sign, end in ((1.0, 1.0 - delta), (-1.0, 1.0 + delta)):
        def F(s, sign=sign):
            return 2.0 + sign * max(float(s), 0.0) ** EXPONENT
        sol = integrate_radial(F, (1.0, end), 0.0, 0.0, rtol=rtol)
        r = np.linspace(1.0, end, 257)
        prof = RadialProfile(r, np.empty(0), np.empty(0), 0.0, end, {}, sol.sol)
        prof.psi, prof.dpsi = prof._eval(r)
        prof.boundary = {"psi": 0.0, "dpsi": 0.0, "d2psi": F(0.0)}
        profiles.append(prof)
    return profiles[0], profiles[1]


def radial_taylor_coefficients(order: int = 8) -> List[sp.Rational]:
    """Exact Taylor coefficients in n = r - 1 of the circle solution.

    Solves (1 + n) psi'' + psi' = (1 + n)(2 - n^5 P^(5/2)), psi = n^2 P,
    coefficient by coefficient in rational arithmetic.
    """
    n = sp.Symbol("n")
    a = [sp.Integer(0), sp.Integer(0)]
    for m in range(order - 1):
        unknown = sp.Symbol("a_next")
        psi = sum(a[k] * n ** k for k in range(len(a))) + unknown * n ** (m + 2)
        P = sp.expand(sp.cancel(psi / n ** 2)) if len(a) > 2 else sp.Integer(1)
        if len(a) > 2:
            Q = sp.series(P ** sp.Rational(5, 2), n, 0, max(m - 4, 1)).removeO()
        else:
            Q = sp.Integer(1)
        expr = sp.expand((1 + n) * sp.diff(psi, n, 2) + sp.diff(psi, n)
                         - (1 + n) * (2 - n ** 5 * Q))
        coeff = expr.coeff(n, m)
        a.append(sp.nsimplify(sp.solve(coeff, unknown)[0]))
    return a
