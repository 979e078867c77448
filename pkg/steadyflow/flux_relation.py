"""Recover the vorticity profile F with lap(psi) = F(psi) from level sets.

Levels are contoured on a grid, the contour points are projected onto the
exact level by Newton steps, and the companion (by default the vorticity)
is sampled along each connected component. A relation is single-valued when
every level carries one companion value, both along each component and
across components.

The interpolant works in the angle variable ``tau`` with
``s = a + (b - a) sin^2(pi tau / 2)``, which turns square-root endpoint
behaviour into smooth behaviour.
"""
from dataclasses import dataclass, field as dc_field
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import minimize

from steadyflow.calculus import grid_laplacian, interior_nodes
from steadyflow.config import Tolerances
from steadyflow.errors import FluxError, PuiseuxFitError
from steadyflow.fields import GridField, ScalarField, grid_nodes
from steadyflow.level_sets import find_contours, match_components

logger = logging.getLogger(__name__)

MAX_POINTS_PER_COMPONENT = 64
PROJECTION_STEPS = 4
# projected points must land on their level to this fraction of b - a
LEVEL_MISS = 1e-6
LEVEL_MISS_GRID = 1e-4
DYADIC_RANGE = range(4, 21)


@dataclass
class LevelSetSample:
    """Companion values sampled along one connected component of {psi = s}."""
    level: float
    component: int
    points: np.ndarray
    values: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def spread(self) -> float:
        return float(np.ptp(self.values)) if len(self.values) else 0.0


@dataclass
class SampleSet:
    samples: List[LevelSetSample]
    value_range: Tuple[float, float]
    levels: List[float]
    skipped: List[float]
    resolution: int

    def __iter__(self):
        return iter(self.samples)

    def __len__(self):
        return len(self.samples)

    def by_level(self) -> Dict[float, List[LevelSetSample]]:
        out: Dict[float, List[LevelSetSample]] = {}
        for sample in self.samples:
            out.setdefault(sample.level, []).append(sample)
        return dict(sorted(out.items()))


# ===== Level choice =====

def tau_of(s, a, b):
    u = np.clip((np.asarray(s, dtype=float) - a) / (b - a), 0.0, 1.0)
    return (2 / np.pi) * np.arcsin(np.sqrt(u))


def s_of(tau, a, b):
    return a + (b - a) * np.sin(np.pi * np.asarray(tau, dtype=float) / 2) ** 2


def default_levels(a: float, b: float, count: int = 256) -> np.ndarray:
    """Uniform in tau plus dyadic windows at both endpoints."""
    tau = (np.arange(count) + 0.5) / count
    levels = list(s_of(tau, a, b))
    width = b - a
    for j in DYADIC_RANGE:
        levels.append(a + width * 2.0 ** -j)
        levels.append(b - width * 2.0 ** -j)
    levels = np.unique(np.array(levels))
    # near-duplicates make the interpolant ill-posed
    keep = np.concatenate([[True], np.diff(levels) > 1e-12 * width])
    return levels[keep]


def value_range(psi: ScalarField, resolution: int = 256) -> Tuple[float, float]:
    """Range [a, b] of psi: grid extremes, boundary samples, then local refinement."""
    domain = psi.domain
    x, y = grid_nodes(domain, resolution)
    XX, YY = np.meshgrid(x, y)
    inside = domain.contains(XX, YY)
    px, py = XX[inside], YY[inside]
    vals = psi(px, py)
    lo, hi = float(np.nanmin(vals)), float(np.nanmax(vals))
    for loop in domain.boundary_loops(2048):
        bv = psi(loop[:, 0], loop[:, 1])
        lo = min(lo, float(np.nanmin(bv)))
        hi = max(hi, float(np.nanmax(bv)))
    if isinstance(psi, GridField):
        return lo, hi

    def refine(start, sign):
        def objective(p):
            if not bool(domain.contains(p[0], p[1])):
                return np.inf
            return sign * float(psi(p[0], p[1]))
        res = minimize(objective, start, method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-16, "maxiter": 500})
        return sign * res.fun if np.isfinite(res.fun) else None

    k_hi = int(np.nanargmax(vals))
    k_lo = int(np.nanargmin(vals))
    top = refine(np.array([px[k_hi], py[k_hi]]), -1.0)
    bottom = refine(np.array([px[k_lo], py[k_lo]]), 1.0)
    if top is not None:
        hi = max(hi, top)
    if bottom is not None:
        lo = min(lo, bottom)
    return lo, hi


# ===== Sampling =====

def _project(psi, pts, level):
    p = pts.copy()
    for _ in range(PROJECTION_STEPS):
        v = psi(p[:, 0], p[:, 1]) - level
        gx, gy = psi.gradient(p[:, 0], p[:, 1])
        g2 = gx * gx + gy * gy
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(g2 > 0, v / g2, 0.0)
        p[:, 0] -= t * gx
        p[:, 1] -= t * gy
    return p


def collect_pairs(psi: ScalarField, levels=None, resolution: int = 256,
                  companion: Optional[ScalarField] = None,
                  critical_levels: Sequence[float] = (),
                  value_range_hint: Optional[Tuple[float, float]] = None,
                  tol: Optional[Tolerances] = None) -> SampleSet:
    """Sample the companion along every closed component of each level set.

    Args:
        psi: The stream function.
        levels: Explicit levels, a level count, or None for the default count.
        resolution: Contouring grid size.
        companion: Field sampled along components (default lap psi).
        critical_levels: Interior critical values; nearby levels are skipped.
        value_range_hint: Known [a, b]; computed when omitted.

    Raises:
        FluxError: A requested level lies outside [a, b].
    """
    tol = tol or Tolerances()
    a, b = value_range_hint or value_range(psi, resolution)
    if not b > a:
        raise FluxError(f"psi is constant ({a}); no level sets to sample")
    width = b - a
    if levels is None or np.isscalar(levels):
        count = tol.flux_levels if levels is None else int(levels)
        levels = default_levels(a, b, count)
    else:
        levels = np.sort(np.asarray(levels, dtype=float))
        if levels.size and (levels[0] < a or levels[-1] > b):
            raise FluxError(f"levels must lie in [{a:.6g}, {b:.6g}]")
    if companion is None:
        companion = grid_laplacian(psi) if isinstance(psi, GridField) else psi.laplacian()

    domain = psi.domain
    if isinstance(psi, GridField):
        x, y, values = psi.x_nodes, psi.y_nodes, np.where(psi.mask, np.nan, psi.values)
    else:
        x, y = grid_nodes(domain, resolution)
        XX, YY = np.meshgrid(x, y)
        values = psi(XX, YY)
        if not domain.periodic:
            # outside the domain psi keeps its formula; its level sets there are not ours
            margin = 0.05 if domain.kind == "jordan-tube" else 1e-12
            values = np.where(domain.contains(XX, YY, tol=margin), values, np.nan)
    h = max(x[1] - x[0], y[1] - y[0])
    gap = tol.critical_level_gap * width
    miss = (LEVEL_MISS_GRID if isinstance(psi, GridField) else LEVEL_MISS) * width

    samples, used, skipped = [], [], []
    for level in levels:
        if any(abs(level - c) < gap for c in critical_levels):
            skipped.append(float(level))
            continue
        found = 0
        for contour in find_contours(values, x, y, level, periodic=domain.periodic):
            if not contour.closed or len(contour) < 4:
                continue
            step = max(1, len(contour) // MAX_POINTS_PER_COMPONENT)
            pts = _project(psi, contour.points[::step], level)
            if np.any(np.linalg.norm(pts - contour.points[::step], axis=1) > 2 * h):
                continue
            if np.nanmax(np.abs(psi(pts[:, 0], pts[:, 1]) - level)) > miss:
                logger.debug("Dropping a %d-point component that misses level %.6g",
                             len(contour), level)
                continue
            if not np.all(domain.contains(pts[:, 0], pts[:, 1], tol=1e-12)):
                continue
            vals = companion(pts[:, 0], pts[:, 1])
            if not np.all(np.isfinite(vals)):
                continue
            samples.append(LevelSetSample(float(level), found, pts, vals))
            found += 1
        if found:
            used.append(float(level))
        else:
            skipped.append(float(level))
    logger.info("Collected %d components on %d levels of %s (%d levels skipped)",
                len(samples), len(used), psi.name, len(skipped))
    return SampleSet(samples, (a, b), used, skipped, resolution)


# ===== Flux relation =====

@dataclass
class FluxRelation:
    """Recovered relation on [a, b] with its branch table.

    ``verdict`` is 'single-valued' or 'branch-discrepancy'. The interpolant
    (or the affine fit, when F is affine) is available either way so
    residual checks can run on non-steady inputs.
    """
    a: float
    b: float
    levels: np.ndarray
    values: np.ndarray
    branch_table: Dict[float, List[Tuple[int, float]]]
    verdict: str
    tol_branch: float
    max_level_spread: float
    max_component_spread: float
    affine: Optional[Tuple[float, float]] = None
    spline: Optional[CubicSpline] = None
    metadata: dict = dc_field(default_factory=dict)

    @property
    def single_valued(self) -> bool:
        return self.verdict == "single-valued"

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.affine is not None:
            return self.affine[0] * s + self.affine[1]
        return self.spline(tau_of(s, self.a, self.b))

    def derivative(self, s):
        """F'(s), by central difference in s."""
        s = np.asarray(s, dtype=float)
        if self.affine is not None:
            return np.full(s.shape, self.affine[0])
        step = 1e-6 * (self.b - self.a)
        lo = np.clip(s - step, self.a, self.b)
        hi = np.clip(s + step, self.a, self.b)
        return (self(hi) - self(lo)) / (hi - lo)


def extract_flux(samples: SampleSet, residual: float = 0.0, min_levels: int = 16,
                 tol: Optional[Tolerances] = None) -> FluxRelation:
    """Branch table, verdict and interpolant from collected samples.

    ``residual`` is the steady residual of the source field; the branch
    tolerance is ten times it, floored at ``tol_branch_floor``.

    Raises:
        FluxError: Fewer than ``min_levels`` usable levels.
    """
    tol = tol or Tolerances()
    grouped = samples.by_level()
    if not grouped:
        raise FluxError("all levels were skipped; nothing to extract")
    if len(grouped) < min_levels:
        raise FluxError(f"need at least {min_levels} usable levels, got {len(grouped)}")
    a, b = samples.value_range
    tol_branch = max(10.0 * residual, tol.tol_branch_floor)
    levels, values, table = [], [], {}
    level_spread = 0.0
    comp_spread = 0.0
    for level, group in grouped.items():
        means = [g.mean for g in group]
        table[level] = [(g.component, g.mean) for g in group]
        level_spread = max(level_spread, float(np.ptp(means)))
        comp_spread = max(comp_spread, max(g.spread for g in group))
        levels.append(level)
        values.append(float(np.mean(means)))
    levels = np.array(levels)
    values = np.array(values)
    single = level_spread <= tol_branch and comp_spread <= tol_branch
    verdict = "single-valued" if single else "branch-discrepancy"
    tau = tau_of(levels, a, b)
    order = np.argsort(tau)
    tau, lv, vv = tau[order], levels[order], values[order]
    keep = np.concatenate([[True], np.diff(tau) > 1e-14])
    spline = CubicSpline(tau[keep], vv[keep])
    slope, intercept = np.polyfit(lv, vv, 1)
    fit_err = float(np.max(np.abs(slope * lv + intercept - vv)))
    scale = max(1.0, float(np.max(np.abs(vv))))
    affine = (float(slope), float(intercept)) if fit_err <= max(tol_branch, 1e-8 * scale) else None
    logger.info("Flux relation on [%.6g, %.6g]: %s (level spread %.2e, component spread %.2e)",
                a, b, verdict, level_spread, comp_spread)
    return FluxRelation(a, b, lv, vv, table, verdict, tol_branch, level_spread, comp_spread,
                        affine if single else None, spline,
                        {"levels_used": int(len(lv)), "levels_skipped": len(samples.skipped)})


def branch_relations(samples: SampleSet, threshold: Optional[float] = None,
                     min_levels: int = 16, tol: Optional[Tolerances] = None) -> List[FluxRelation]:
    """Split components into branches followed across levels and extract each.

    Components of consecutive levels are paired by Hausdorff proximity; a
    component with no partner starts a new branch. Components whose values
    vary along the component are left out.
    """
    tol = tol or Tolerances()
    grouped = samples.by_level()
    a, b = samples.value_range
    if threshold is None:
        pts = np.vstack([s.points for s in samples.samples]) if samples.samples else np.zeros((1, 2))
        threshold = 0.25 * float(np.max(np.ptp(pts, axis=0)))
    branches: List[List[LevelSetSample]] = []
    heads: List[int] = []
    for level, group in grouped.items():
        group = [g for g in group if g.spread <= max(tol.tol_branch_floor, 1e-6 * max(1.0, abs(g.mean)))]
        if not group:
            continue
        pairs = match_components([branches[i][-1].points for i in heads], [g.points for g in group],
                                 threshold)
        taken = set()
        new_heads = []
        for hi, gi in pairs:
            branches[heads[hi]].append(group[gi])
            taken.add(gi)
            new_heads.append(heads[hi])
        for gi, g in enumerate(group):
            if gi not in taken:
                branches.append([g])
                new_heads.append(len(branches) - 1)
        heads = new_heads
    relations = []
    for members in branches:
        if len(members) < min_levels:
            continue
        lv = [m.level for m in members]
        sub = SampleSet(members, (a, b), lv, [], samples.resolution)
        rel = extract_flux(sub, min_levels=min_levels, tol=tol)
        rel.metadata["level_span"] = (min(lv), max(lv))
        relations.append(rel)
    logger.info("Found %d branches with at least %d levels", len(relations), min_levels)
    return relations


# ===== Endpoint expansions =====

@dataclass
class PuiseuxSeries:
    endpoint: str
    value: float
    k0: int
    exponents: List[float]
    coefficients: List[float]
    residual: float
    leading_exponent: Optional[float]
    leading_coefficient: float
    leading_negative: bool
    loglog_exponent: Optional[float]
    holder_exponent: Optional[float]
    analytic: bool
    window: float
    samples: int

    def __call__(self, s):
        t = np.abs(np.asarray(s, dtype=float) - self.value)
        return sum(c * t ** e for c, e in zip(self.coefficients, self.exponents))


def _lstsq(t, f, exponents):
    tmax = float(np.max(t))
    cols = np.column_stack([(t / tmax) ** e for e in exponents])
    coef, *_ = np.linalg.lstsq(cols, f, rcond=None)
    resid = cols @ coef - f
    rel = float(np.linalg.norm(resid) / max(np.linalg.norm(f), 1e-300))
    return coef / np.array([tmax ** e for e in exponents]), rel


def _loglog(t, f, base):
    dev = np.abs(f - base)
    keep = (dev > 1e-12 * max(1.0, abs(base))) & (t > 0)
    if np.count_nonzero(keep) < 4:
        return None
    return float(np.polyfit(np.log(t[keep]), np.log(dev[keep]), 1)[0])


def fit_puiseux(flux: FluxRelation, endpoint: str = "b", k0_max: int = 4,
                window: Optional[float] = None, terms: int = 8,
                tol: Optional[Tolerances] = None) -> PuiseuxSeries:
    """Fit a fractional-power expansion of F at one end of its range.

    At the maximum b the exponents are k/k0 from k = k0 - 1 on (k0 = 1 adds
    the constant); the smallest k0 whose relative residual is below
    ``tol_fit`` wins. At the minimum a the lattice is k/2 from k = 0, and
    the series counts as analytic when every odd coefficient is negligible.

    Raises:
        PuiseuxFitError: Too few samples in the window, or no lattice fits.
    """
    tol = tol or Tolerances()
    if endpoint not in ("a", "b"):
        raise ValueError("endpoint must be 'a' or 'b'")
    window = tol.endpoint_window if window is None else window
    e = flux.b if endpoint == "b" else flux.a
    t = np.abs(flux.levels - e)
    sel = (t <= window * (flux.b - flux.a)) & (t > 0)
    if np.count_nonzero(sel) < 12:
        raise PuiseuxFitError(f"only {int(np.count_nonzero(sel))} samples within the endpoint "
                              f"window at {endpoint}; need 12")
    t, f = t[sel], flux.values[sel]

    if endpoint == "b":
        chosen = None
        for k0 in range(1, k0_max + 1):
            if k0 == 1:
                exps = [float(k) for k in range(terms)]
            else:
                exps = [k / k0 for k in range(k0 - 1, k0 - 1 + terms)]
            coef, rel = _lstsq(t, f, exps)
            logger.debug("Puiseux k0=%d at b: relative residual %.2e", k0, rel)
            if rel <= tol.tol_fit:
                chosen = (k0, exps, coef, rel)
                break
        if chosen is None:
            raise PuiseuxFitError("no Puiseux structure detected at this resolution")
        k0, exps, coef, rel = chosen
        analytic = k0 == 1
    else:
        exps = [k / 2 for k in range(terms)]
        coef, rel = _lstsq(t, f, exps)
        if rel > tol.tol_fit:
            raise PuiseuxFitError("no Puiseux structure detected at this resolution")
        dev = max(float(np.max(np.abs(f - coef[0]))), 1e-300)
        odd = any(abs(coef[k]) * t.max() ** exps[k] > 1e-3 * dev for k in range(1, terms, 2))
        k0 = 2 if odd else 1
        analytic = not odd

    base = coef[0] if exps[0] == 0 else 0.0
    dev = max(float(np.max(np.abs(f - base))), 1e-300)
    lead = None
    lead_coef = 0.0
    for ex, c in zip(exps, coef):
        if ex == 0:
            continue
        if abs(c) * t.max() ** ex > 1e-3 * dev:
            lead, lead_coef = ex, float(c)
            break
    slope = _loglog(t, f, base)
    holder = None if slope is None else min(1.0, slope)
    series = PuiseuxSeries(endpoint, float(e), int(k0), [float(x) for x in exps],
                           [float(c) for c in coef], rel, lead, lead_coef, lead_coef < 0, slope,
                           holder, analytic, float(window), int(t.size))
    logger.info("Puiseux fit at %s=%.6g: k0=%d leading exponent %s (log-log %s)", endpoint, e,
                k0, lead, None if slope is None else round(slope, 4))
    return series


def verify_flux_residual(psi: ScalarField, flux: FluxRelation, resolution: int = 256,
                         tol: Optional[Tolerances] = None) -> float:
    """sup |lap psi - F(psi)| over interior nodes whose psi lies in [a, b]."""
    tol = tol or Tolerances()
    if isinstance(psi, GridField):
        lap = grid_laplacian(psi).values
        vals = np.where(psi.mask, np.nan, psi.values)
        keep = interior_nodes(psi.mask, psi.periodic, tol.boundary_band_stencils)
    else:
        x, y = grid_nodes(psi.domain, resolution)
        XX, YY = np.meshgrid(x, y)
        mask = ~psi.domain.contains(XX, YY)
        keep = interior_nodes(mask, psi.domain.periodic, tol.boundary_band_stencils)
        vals = np.full(XX.shape, np.nan)
        lap = np.full(XX.shape, np.nan)
        vals[keep] = psi(XX[keep], YY[keep])
        lap[keep] = psi.laplacian()(XX[keep], YY[keep])
    use = keep & np.isfinite(vals) & np.isfinite(lap) & (vals >= flux.a) & (vals <= flux.b)
    if not np.any(use):
        raise FluxError("no interior nodes inside the flux range")
    err = float(np.max(np.abs(lap[use] - flux(vals[use]))))
    logger.info("Flux residual of %s: %.3e", psi.name, err)
    return err
