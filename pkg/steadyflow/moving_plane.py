"""Moving-plane sweeps used as a numerical symmetry detector.

For a unit direction e the cap is ``{x·e < lambda}`` and the reflection is
``pi(x) = x + 2 (lambda - x·e) e``. A state at ``lambda`` samples the
difference ``h = psi - psi∘pi`` on the reflected cap. The sweep starts at the
low end of the region's extent along e and records states until the reflected
cap leaves the (hole-filled) region. ``lambda_0`` is the last level where the
difference stays nonnegative and the cap stays inside.

Symmetry about a hyperplane is tested on the whole region, not only on the
cap: every sample must reflect back into the region and the values must match
to ``tol_sym`` times the field's scale. Besides ``lambda_0`` the test also runs
at the balance level (midpoint of the extent), which catches symmetric fields
whose sweep stops early, such as tube fields that vanish on their core curve.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from steadyflow.config import Tolerances
from steadyflow.errors import DomainError, FluxError, SignChangeError, SweepError
from steadyflow.fields import ScalarField
from steadyflow.regions import Region
from steadyflow.stencils import fd_weights

logger = logging.getLogger(__name__)

BISECTION_TOL = 1e-8
GEOMETRY_RTOL = 1e-10
CONTACT_RTOL = 1e-6
HOPF_STEPS = 5
EVENT_KINDS = ("internal", "boundary", "monotonicity")
HOPF_VERDICTS = ("zero", "positive", "failed", "undetermined")


def unit(direction) -> np.ndarray:
    e = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(e)
    if e.shape != (2,) or not norm > 0:
        raise SweepError(f"direction must be a nonzero 2-vector, got {direction!r}")
    return e / norm


def reflect(points: np.ndarray, e: np.ndarray, lam: float) -> np.ndarray:
    """Mirror image of ``points`` (n, 2) through ``{x·e = lam}``."""
    return points + 2.0 * (lam - points @ e)[:, None] * e[None, :]


def resolve_region(psi: ScalarField, region=None) -> Region:
    if region is not None:
        return region
    try:
        return Region.from_domain(psi.domain)
    except DomainError as exc:
        raise SweepError(f"no bounded region to sweep: {exc}") from exc


# ===== Sweep states =====

class _SweepContext:
    """Samples, values and tolerances shared by every state of one sweep."""

    def __init__(self, psi: ScalarField, region: Region, e: np.ndarray, resolution: int,
                 tol: Tolerances):
        self.psi = psi
        self.region = region
        self.e = e
        self.tol = tol
        gx, gy = region.interior_grid(resolution)
        bpts, bnormals = region.boundary_samples(4 * resolution)
        self.boundary = np.asarray(bpts, dtype=float)
        self.normals = np.asarray(bnormals, dtype=float)
        points = np.vstack([np.column_stack([gx, gy]), self.boundary])
        values = np.asarray(psi(points[:, 0], points[:, 1]), dtype=float)
        keep = np.isfinite(values)
        self.points = points[keep]
        self.values = values[keep]
        self.proj = self.points @ e
        lo, hi = region.support(e)
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise SweepError(f"region is unbounded or degenerate along {e.tolist()}")
        self.lo, self.hi = float(lo), float(hi)
        xmin, xmax, ymin, ymax = region.bounding_box()
        self.diam = float(np.hypot(xmax - xmin, ymax - ymin))
        self.scale = max(float(np.max(np.abs(self.values))) if len(self.values) else 0.0, 1e-300)
        self.spacing = max(xmax - xmin, ymax - ymin) / max(resolution - 1, 1)

    def _inside_filled(self, pts: np.ndarray) -> np.ndarray:
        if not len(pts):
            return np.ones(0, dtype=bool)
        ok = self.region.filled_contains(pts[:, 0], pts[:, 1])
        if not np.all(ok):
            near = self.region.boundary_distance(pts[~ok, 0], pts[~ok, 1]) <= GEOMETRY_RTOL * self.diam
            ok = ok.copy()
            ok[~ok] = near
        return ok

    def state(self, lam: float) -> "ReflectionState":
        cap = self.proj < lam
        x = self.points[cap]
        y = reflect(x, self.e, lam)
        admissible = bool(np.all(self._inside_filled(y)))
        inside = self.region.contains(y[:, 0], y[:, 1]) if len(y) else np.zeros(0, dtype=bool)
        y_in, x_in = y[inside], x[inside]
        psi_y = np.asarray(self.psi(y_in[:, 0], y_in[:, 1]), dtype=float) if len(y_in) else np.zeros(0)
        psi_x = self.values[cap][inside]
        finite = np.isfinite(psi_y)
        y_in, x_in, psi_y, psi_x = y_in[finite], x_in[finite], psi_y[finite], psi_x[finite]
        h = psi_y - psi_x
        if len(h):
            k = int(np.argmin(h))
            h_min, argmin, h_sup = float(h[k]), tuple(map(float, y_in[k])), float(np.max(np.abs(h)))
        else:
            h_min, argmin, h_sup = 0.0, None, 0.0
        monotone = h_min >= -self.tol.tol_mp * self.scale
        return ReflectionState(self.e.copy(), float(lam), admissible, monotone, h_min, argmin, h_sup,
                               y_in, x_in, psi_y, psi_x, self)

    def symmetric_about(self, lam: float) -> Tuple[bool, float]:
        """Whole-region reflection test; returns (symmetric, sup of the mismatch)."""
        w = reflect(self.points, self.e, lam)
        inside = self.region.contains(w[:, 0], w[:, 1])
        geo_tol = self.tol.tol_center * self.diam
        if not np.all(inside):
            gap = self.region.boundary_distance(w[~inside, 0], w[~inside, 1])
            if np.any(gap > geo_tol):
                return False, float("inf")
        pw = np.asarray(self.psi(w[inside, 0], w[inside, 1]), dtype=float)
        diff = np.abs(self.values[inside] - pw)
        diff = diff[np.isfinite(diff)]
        if not len(diff):
            return False, float("inf")
        sup = float(np.max(diff))
        return sup <= self.tol.tol_sym * self.scale, sup

    def default_lambdas(self, count: int) -> np.ndarray:
        k = np.arange(1, count + 1)
        return self.lo + (self.hi - self.lo) * k / (count + 1)


@dataclass
class ReflectionState:
    """One level of a sweep.

    ``points`` are the reflected-cap samples inside the region, ``sources``
    their mirror images in the cap; ``h = values - source_values``.
    """
    direction: np.ndarray
    lam: float
    admissible: bool
    monotone: bool
    h_min: float
    argmin: Optional[Tuple[float, float]]
    h_sup: float
    points: np.ndarray = dc_field(repr=False)
    sources: np.ndarray = dc_field(repr=False)
    values: np.ndarray = dc_field(repr=False)
    source_values: np.ndarray = dc_field(repr=False)
    context: _SweepContext = dc_field(repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return self.admissible and self.monotone

    @property
    def h(self) -> np.ndarray:
        return self.values - self.source_values

    def state_at(self, lam: float) -> "ReflectionState":
        return self.context.state(lam)

    def difference(self) -> Callable:
        """``h(x, y) = psi(x, y) - psi(pi(x, y))`` at this level."""
        psi, e, lam = self.context.psi, self.direction, self.lam

        def h(x, y):
            x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
            pts = np.column_stack([x.ravel(), y.ravel()])
            mirror = reflect(pts, e, lam)
            out = psi(pts[:, 0], pts[:, 1]) - psi(mirror[:, 0], mirror[:, 1])
            return np.asarray(out, dtype=float).reshape(x.shape)
        return h

    def hyperplane_residual(self, count: int = 32) -> float:
        """sup |h| along the hyperplane inside the region (zero up to rounding)."""
        ctx = self.context
        t = np.array([-self.direction[1], self.direction[0]])
        base = self.lam * self.direction
        s = np.linspace(-ctx.diam, ctx.diam, 8 * count)
        pts = base[None, :] + s[:, None] * t[None, :]
        pts = pts[ctx.region.contains(pts[:, 0], pts[:, 1])]
        if not len(pts):
            return 0.0
        vals = self.difference()(pts[:, 0], pts[:, 1])
        vals = vals[np.isfinite(vals)]
        return float(np.max(np.abs(vals))) if len(vals) else 0.0


def reflect_sweep(psi: ScalarField, region=None, direction=(1.0, 0.0), lambdas=None,
                  resolution: int = 96, tol: Optional[Tolerances] = None) -> List[ReflectionState]:
    """Sweep the hyperplane along ``direction`` from the low end of the region.

    Args:
        psi: Field to test.
        region: Region to sweep; defaults to the field's domain.
        direction: Sweep direction (normalized here).
        lambdas: Levels to visit, or a count. Defaults to ``sweep_lambdas``
            levels strictly inside the region's extent.
        resolution: Interior grid used for sampling.

    Returns:
        States in increasing ``lambda`` up to and including the first state
        whose reflected cap leaves the region.

    Raises:
        SweepError: Unbounded region or bad direction.
    """
    tol = tol or Tolerances()
    e = unit(direction)
    ctx = _SweepContext(psi, resolve_region(psi, region), e, resolution, tol)
    if lambdas is None or np.isscalar(lambdas):
        lambdas = ctx.default_lambdas(int(lambdas or tol.sweep_lambdas))
    states = []
    for lam in np.sort(np.asarray(lambdas, dtype=float)):
        st = ctx.state(float(lam))
        states.append(st)
        if not st.admissible:
            break
    logger.debug("Sweep along %s: %d states, last lambda %.6g", e.tolist(), len(states),
                 states[-1].lam if states else float("nan"))
    return states


# ===== Lambda_0 and tangency =====

@dataclass
class TangencyEvent:
    kind: str  # internal, boundary, monotonicity
    contact: Optional[Tuple[float, float]]
    lam0: float
    h_zero: bool
    normal: Optional[Tuple[float, float]] = None
    detail: str = ""


def _classify(good: ReflectionState, bad: ReflectionState) -> TangencyEvent:
    ctx = good.context
    e, lam0 = good.direction, good.lam
    h_zero = good.h_sup <= ctx.tol.tol_sym * ctx.scale
    if bad.admissible and not bad.monotone:
        return TangencyEvent("monotonicity", bad.argmin, lam0, h_zero,
                             detail=f"h_min={bad.h_min:.3e} just past lambda_0")
    # reflected boundary points landing back on the boundary away from the plane
    cap = (ctx.boundary @ e) < lam0 - CONTACT_RTOL * ctx.diam
    if np.any(cap):
        src = ctx.boundary[cap]
        img = reflect(src, e, lam0)
        gap = ctx.region.boundary_distance(img[:, 0], img[:, 1])
        k = int(np.argmin(gap))
        if gap[k] <= max(CONTACT_RTOL * ctx.diam, 4 * BISECTION_TOL):
            # inward normal at the contact, for the Hopf test
            j = int(np.argmin(np.linalg.norm(ctx.boundary - img[k], axis=1)))
            inward = -ctx.normals[j]
            return TangencyEvent("internal", tuple(map(float, img[k])), lam0, h_zero,
                                 tuple(map(float, inward)), f"gap={gap[k]:.2e}")
    band = np.abs(ctx.boundary @ e - lam0) <= 2 * ctx.spacing
    if np.any(band):
        pts, normals = ctx.boundary[band], ctx.normals[band]
        angle = np.abs(np.arcsin(np.clip(np.abs(normals @ e), 0.0, 1.0)))
        k = int(np.argmin(angle))
        if angle[k] <= ctx.tol.tol_ang:
            return TangencyEvent("boundary", tuple(map(float, pts[k])), lam0, h_zero,
                                 tuple(map(float, normals[k])), f"angle={angle[k]:.2e}")
    logger.warning("Tangency at lambda_0=%.6g not resolved on the sample set", lam0)
    return TangencyEvent("internal", good.argmin, lam0, h_zero, detail="unresolved")


def find_lambda0(states: Sequence[ReflectionState]) -> Tuple[float, TangencyEvent, ReflectionState]:
    """Locate ``lambda_0`` by bisection and classify the stopping event.

    Raises:
        SweepError: No states, or the first state is already inadmissible or
            non-monotone.
    """
    if not states:
        raise SweepError("no admissible states in the sweep")
    first = states[0]
    if not first.admissible:
        raise SweepError(f"reflected cap leaves the region already at lambda={first.lam:.6g}")
    if not first.monotone:
        raise SweepError(f"monotonicity fails at the smallest lambda={first.lam:.6g} "
                         f"(h_min={first.h_min:.3e})")
    ctx = first.context
    fail = next((i for i, st in enumerate(states) if not st.ok), None)
    if fail is None:
        good, bad = states[-1], ctx.state(ctx.hi)
    else:
        good, bad = states[fail - 1], states[fail]
    if not bad.ok:
        while bad.lam - good.lam > BISECTION_TOL:
            mid = ctx.state(0.5 * (good.lam + bad.lam))
            if mid.ok:
                good = mid
            else:
                bad = mid
    event = _classify(good, bad)
    logger.debug("lambda_0=%.10g along %s (%s)", good.lam, good.direction.tolist(), event.kind)
    return good.lam, event, good


# ===== Coefficient audit =====

@dataclass
class AuditResult:
    lam: float
    value: float
    samples: int
    skipped: int
    c_min: float


def _flux_derivative(flux, s):
    if hasattr(flux, "derivative"):
        return np.asarray(flux.derivative(s), dtype=float)
    step = 1e-6 * max(1.0, float(np.max(np.abs(s))) if np.size(s) else 1.0)
    return (np.asarray(flux(s + step), dtype=float) - np.asarray(flux(s - step), dtype=float)) / (2 * step)


def coefficient_audit(psi: ScalarField, flux, state: ReflectionState,
                      tol: Optional[Tolerances] = None) -> AuditResult:
    """``max(-c, 0) · dist`` over the reflected cap, with ``c`` the difference quotient of F.

    Args:
        psi: The swept field (only used to name the run in logs).
        flux: A single-valued relation or any callable ``F(s)``.
        state: Admissible sweep state.

    Raises:
        FluxError: The relation is not single-valued.
    """
    tol = tol or Tolerances()
    if getattr(flux, "single_valued", True) is False:
        raise FluxError("coefficient audit needs a single-valued flux relation")
    u, v = state.values, state.source_values
    if not len(u):
        return AuditResult(state.lam, 0.0, 0, 0, 0.0)
    d = u - v
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.empty_like(d)
        big = np.abs(d) > tol.eps_div
        c[big] = (np.asarray(flux(u[big]), dtype=float) - np.asarray(flux(v[big]), dtype=float)) / d[big]
        if np.any(~big):
            c[~big] = _flux_derivative(flux, u[~big])
    usable = np.isfinite(c)
    skipped = int(np.count_nonzero(~usable))
    if not np.any(usable):
        return AuditResult(state.lam, float("nan"), 0, skipped, float("nan"))
    e = state.direction
    y, x = state.points[usable], state.sources[usable]
    region = state.context.region
    dist = np.minimum(y @ e - state.lam, region.boundary_distance(x[:, 0], x[:, 1]))
    dist = np.maximum(dist, 0.0)
    value = float(np.max(np.maximum(-c[usable], 0.0) * dist))
    if skipped:
        logger.debug("Audit of %s at lambda=%.6g skipped %d samples", getattr(psi, "name", "field"),
                     state.lam, skipped)
    return AuditResult(state.lam, value, int(np.count_nonzero(usable)), skipped, float(np.min(c[usable])))


def audit_sweep(psi: ScalarField, flux, states: Sequence[ReflectionState],
                tol: Optional[Tolerances] = None) -> Tuple[List[AuditResult], float]:
    """Audit every admissible state; returns the results and the observed bound M."""
    results = [coefficient_audit(psi, flux, st, tol) for st in states if st.admissible]
    finite = [r.value for r in results if np.isfinite(r.value)]
    return results, (max(finite) if finite else float("nan"))


@dataclass
class QuotientCheck:
    samples: int
    violations: int
    min_value: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def singular_quotient_check(u, u_reflected, k0: int, d1: float = -1.0,
                            eps_div: float = 1e-10) -> QuotientCheck:
    """Sign of ``d1 ((1-u)^p - (1-v)^p) / (u - v)`` with ``p = (k0-1)/k0`` on (0, 1) values.

    The quotient of a decreasing function is nonpositive, so ``d1 < 0``
    must give nonnegative values wherever ``|u - v| > eps_div``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(u_reflected, dtype=float)
    p = (k0 - 1) / k0
    keep = (np.abs(u - v) > eps_div) & (u > 0) & (u < 1) & (v > 0) & (v < 1)
    if not np.any(keep):
        return QuotientCheck(0, 0, float("nan"))
    q = d1 * ((1 - u[keep]) ** p - (1 - v[keep]) ** p) / (u[keep] - v[keep])
    bad = int(np.count_nonzero(q < -1e-12 * np.maximum(1.0, np.abs(q))))
    return QuotientCheck(int(np.count_nonzero(keep)), bad, float(np.min(q)))


def state_quotient_check(state: ReflectionState, k0: int, value_range: Tuple[float, float],
                         d1: float = -1.0, tol: Optional[Tolerances] = None) -> QuotientCheck:
    """Singular-quotient sign check on a sweep state, values normalized to ``value_range``."""
    tol = tol or Tolerances()
    a, b = value_range
    span = b - a
    return singular_quotient_check((state.values - a) / span, (state.source_values - a) / span,
                                   k0, d1, tol.eps_div / span)


# ===== Hopf-type sign checks =====

@dataclass
class HopfReport:
    kind: str
    contact: Tuple[float, float]
    verdict: str
    derivatives: List[float]
    directions: List[Tuple[float, float]]
    h_sup: float


def hopf_sign_check(h: Callable, contact, kind: str = "internal", normal=(0.0, 1.0),
                    frame=None, radius: float = 0.05, tol: float = 1e-9) -> HopfReport:
    """Test the sign of ``h`` near a contact point where ``h = 0``.

    ``internal``: the half-ball ``(x - x0)·normal >= 0``; reports the
    derivative along ``normal``. ``boundary``: the quarter region
    ``(x - x0)·e1 > 0, (x - x0)·e2 < 0`` for ``frame = (e1, e2)``; reports the
    second derivative along ``eta = cos(t) e1 - sin(t) e2`` for three angles.

    Raises:
        SignChangeError: ``h`` is negative in the test region.
    """
    if kind not in ("internal", "boundary"):
        raise SignChangeError(f"unknown contact kind {kind!r}")
    x0 = np.asarray(contact, dtype=float)
    if kind == "internal":
        nu = unit(normal)
        tangent = np.array([-nu[1], nu[0]])
        angles = np.linspace(0.0, np.pi, 17)
        dirs_region = np.outer(np.cos(angles), tangent) + np.outer(np.sin(angles), nu)
        directions = [nu]
        order = 1
    else:
        e1, e2 = (np.array([1.0, 0.0]), np.array([0.0, 1.0])) if frame is None else map(unit, frame)
        angles = np.linspace(0.0, 0.5 * np.pi, 9)
        dirs_region = np.outer(np.cos(angles), e1) - np.outer(np.sin(angles), e2)
        directions = [np.cos(t) * e1 - np.sin(t) * e2 for t in (np.pi / 8, np.pi / 4, 3 * np.pi / 8)]
        order = 2
    radii = np.linspace(0.0, radius, 9)[1:]
    pts = x0[None, None, :] + radii[:, None, None] * dirs_region[None, :, :]
    vals = np.asarray(h(pts[..., 0], pts[..., 1]), dtype=float)
    vals = vals[np.isfinite(vals)]
    if not len(vals):
        return HopfReport(kind, tuple(map(float, x0)), "undetermined", [], [], float("nan"))
    h_sup = float(np.max(np.abs(vals)))
    if float(np.min(vals)) < -tol:
        raise SignChangeError(f"h is negative in the test region near {x0.tolist()} "
                              f"(min {float(np.min(vals)):.3e})")
    as_tuples = [tuple(map(float, d)) for d in directions]
    if h_sup <= tol:
        return HopfReport(kind, tuple(map(float, x0)), "zero", [0.0] * len(directions), as_tuples, h_sup)
    eps = radius / 100
    offsets = eps * np.arange(HOPF_STEPS)
    weights = fd_weights(0.0, offsets, order)[order]
    derivs = []
    for d in directions:
        ray = x0[None, :] + offsets[:, None] * d[None, :]
        derivs.append(float(weights @ np.asarray(h(ray[:, 0], ray[:, 1]), dtype=float)))
    verdict = "positive" if min(derivs) > tol else "failed"
    return HopfReport(kind, tuple(map(float, x0)), verdict, derivs, as_tuples, h_sup)


# ===== Per-direction analysis and the global verdict =====

@dataclass
class DirectionReport:
    index: int
    direction: Tuple[float, float]
    lambda0: Optional[float]
    event: Optional[TangencyEvent]
    symmetric: bool
    symmetry_level: Optional[float]
    balance_level: float
    mismatch: float
    profile: List[Tuple[float, float]]
    sweep_error: Optional[str] = None
    hopf: Optional[HopfReport] = None
    audit: Optional[float] = None

    @property
    def verdict(self) -> str:
        return "symmetric" if self.symmetric else "asymmetric"


@dataclass
class SymmetryVerdict:
    kind: str  # radial, axis-symmetric, asymmetric
    center: Optional[Tuple[float, float]]
    center_error: float
    axes: List[Tuple[float, float]]  # (angle of the normal in [0, pi), offset)
    symmetric_directions: int


def _hopf_for(event: TangencyEvent, state: ReflectionState) -> Optional[HopfReport]:
    if event.contact is None or event.kind == "monotonicity" or event.normal is None:
        return None
    ctx = state.context
    radius = 0.02 * ctx.diam
    h = state.difference()
    try:
        if event.kind == "internal":
            return hopf_sign_check(h, event.contact, "internal", event.normal, radius=radius,
                                   tol=ctx.tol.tol_sym * ctx.scale)
        return hopf_sign_check(h, event.contact, "boundary", frame=(state.direction, event.normal),
                               radius=radius, tol=ctx.tol.tol_sym * ctx.scale)
    except SignChangeError as exc:
        logger.info("Hopf precondition fails at %s: %s", event.contact, exc)
        return None


def analyze_direction(psi: ScalarField, region: Region, direction, index: int = 0, lambdas=None,
                      resolution: int = 96, flux=None,
                      tol: Optional[Tolerances] = None) -> DirectionReport:
    """Sweep one direction, locate ``lambda_0`` and test symmetry there and at the balance level."""
    tol = tol or Tolerances()
    e = unit(direction)
    states = reflect_sweep(psi, region, e, lambdas, resolution, tol)
    ctx = states[0].context if states else _SweepContext(psi, region, e, resolution, tol)
    balance = 0.5 * (ctx.lo + ctx.hi)
    profile = [(st.lam, st.h_min) for st in states]
    lam0 = event = hopf = None
    error = None
    symmetric, level, mismatch = False, None, float("inf")
    try:
        lam0, event, at_lam0 = find_lambda0(states)
        symmetric, mismatch = ctx.symmetric_about(lam0)
        if symmetric:
            level = lam0
        hopf = _hopf_for(event, at_lam0)
    except SweepError as exc:
        error = str(exc)
        logger.info("Direction %d: %s", index, exc)
    if not symmetric:
        sym_b, mis_b = ctx.symmetric_about(balance)
        mismatch = min(mismatch, mis_b)
        if sym_b:
            symmetric, level = True, balance
    audit = None
    if flux is not None:
        _, audit = audit_sweep(psi, flux, states, tol)
    return DirectionReport(index, tuple(map(float, e)), lam0, event, symmetric, level, balance,
                           mismatch, profile, error, hopf, audit)


def symmetry_verdict(reports: Sequence[DirectionReport], tol: Optional[Tolerances] = None,
                     min_directions: int = 8) -> SymmetryVerdict:
    """Combine per-direction reports into radial, axis-symmetric or asymmetric."""
    tol = tol or Tolerances()
    sym = [r for r in reports if r.symmetric]
    axes: List[Tuple[float, float]] = []
    for r in sym:
        e = np.asarray(r.direction)
        angle, offset = float(np.arctan2(e[1], e[0])), float(r.symmetry_level)
        if angle < 0:
            angle += 2 * np.pi
        if angle >= np.pi - 1e-12:
            angle, offset = angle - np.pi, -offset
        if not any(abs(angle - a) < 1e-6 and abs(offset - o) < tol.tol_center for a, o in axes):
            axes.append((angle, offset))
    if not sym:
        return SymmetryVerdict("asymmetric", None, float("nan"), [], 0)
    if len(sym) == len(reports) and len(reports) >= min_directions:
        E = np.array([r.direction for r in sym])
        levels = np.array([r.symmetry_level for r in sym])
        center, *_ = np.linalg.lstsq(E, levels, rcond=None)
        err = float(np.max(np.abs(E @ center - levels)))
        if err <= tol.tol_center:
            return SymmetryVerdict("radial", (float(center[0]), float(center[1])), err, axes, len(sym))
        logger.info("Axes not concurrent (spread %.3e); reporting axis symmetry", err)
    return SymmetryVerdict("axis-symmetric", None, float("nan"), axes, len(sym))


@dataclass
class MovingPlaneReport:
    directions: List[DirectionReport]
    verdict: SymmetryVerdict
    audit: Optional[float] = None
    metadata: dict = dc_field(default_factory=dict)

    def table(self) -> pd.DataFrame:
        rows = []
        for r in self.directions:
            rows.append({
                "index": r.index, "ex": r.direction[0], "ey": r.direction[1],
                "lambda0": r.lambda0, "event": r.event.kind if r.event else None,
                "h_zero": r.event.h_zero if r.event else None, "verdict": r.verdict,
                "symmetry_level": r.symmetry_level, "mismatch": r.mismatch,
                "hopf": r.hopf.verdict if r.hopf else None, "audit": r.audit,
                "sweep_error": r.sweep_error,
            })
        return pd.DataFrame(rows)


def run_moving_plane(psi: ScalarField, region=None, directions: Optional[int] = None, lambdas=None,
                     resolution: int = 96, flux=None, workers: int = 1,
                     tol: Optional[Tolerances] = None) -> MovingPlaneReport:
    """Sweep ``directions`` equally spaced directions over [0, 2 pi) and merge the verdicts.

    Directions are independent and run on ``workers`` threads; the reports
    come back ordered by direction index.
    """
    tol = tol or Tolerances()
    count = int(directions or tol.directions)
    if count < 1:
        raise SweepError("at least one direction is needed")
    region = resolve_region(psi, region)
    angles = 2 * np.pi * np.arange(count) / count
    dirs = [(float(np.cos(t)), float(np.sin(t))) for t in angles]

    def one(i):
        return analyze_direction(psi, region, dirs[i], i, lambdas, resolution, flux, tol)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(count)))
    else:
        reports = [one(i) for i in range(count)]
    verdict = symmetry_verdict(reports, tol)
    audits = [r.audit for r in reports if r.audit is not None and np.isfinite(r.audit)]
    logger.info("Moving plane on %s: %s (%d/%d symmetric directions)", getattr(psi, "name", "field"),
                verdict.kind, verdict.symmetric_directions, count)
    return MovingPlaneReport(reports, verdict, max(audits) if audits else None,
                             {"region": region.name, "directions": count, "resolution": resolution})
