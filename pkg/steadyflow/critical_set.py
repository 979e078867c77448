"""Degrees of vanishing, critical-set tracing and the region decomposition.

The degree of f at x is the first k >= 1 whose Taylor norm
``c_k = max_{|alpha|=k} |d^alpha f(x)| / alpha!`` exceeds ``tol_deg`` times the
local scale ``max_{1<=k<=K} c_k``.

Critical sets are found on a grid in four passes: a candidate band where
the Newton distance estimate ``|grad f| / |D^2 f|`` is below 1.5 cells,
connected labelling, Newton projection onto ``grad f = 0`` (with a
multiplicity-corrected step on degenerate curves) and classification of each
cluster into isolated points, arcs, loops and plateaus.
"""
from dataclasses import dataclass, field as dc_field
from math import factorial
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from steadyflow.config import Tolerances
from steadyflow.errors import DecompositionError, DomainError, ResolutionError
from steadyflow.fields import Domain, ScalarField, grid_nodes
from steadyflow.regions import Region

logger = logging.getLogger(__name__)


@dataclass
class DegreeResult:
    """Degree of vanishing at one point.

    ``degree`` is None when every Taylor norm up to K is below tolerance
    (``exceeds`` is then True).
    """
    point: Tuple[float, float]
    degree: Optional[int]
    exceeds: bool
    leading_norm: float
    confidence: float
    norms: List[float] = dc_field(default_factory=list)


@dataclass
class CriticalComponent:
    kind: str  # isolated, arc, loop, plateau
    points: np.ndarray
    degrees: List[Optional[int]]
    constant_degree: bool
    anomalous: bool = False
    branch: bool = False
    spacing: float = 0.0

    @property
    def degree(self) -> Optional[int]:
        known = [d for d in self.degrees if d is not None]
        if not known or not self.constant_degree:
            return None
        return known[0]

    @property
    def is_curve(self) -> bool:
        return self.kind in ("arc", "loop")

    def region(self) -> Optional[Region]:
        """Region enclosed by a loop component."""
        if self.kind != "loop":
            return None
        return Region.from_polyline(self.points, name="critical-loop")


@dataclass
class Cell:
    id: int
    node_count: int
    area: float
    touches: List[int]
    isolated: List[int]
    representative: Tuple[float, float]


@dataclass
class RegionDecomposition:
    cells: List[Cell]
    adjacency: List[Tuple[int, int]]
    innermost: Optional[int]
    no_critical_curves: bool
    labels: np.ndarray
    x: np.ndarray
    y: np.ndarray
    domain: Domain
    components: List[CriticalComponent]

    @property
    def innermost_cell(self) -> Optional[Cell]:
        return None if self.innermost is None else self.cells[self.innermost]

    def cell_mask(self, cell_id: int) -> np.ndarray:
        return self.labels == cell_id

    def innermost_region(self) -> Optional[Region]:
        """Loop bounding the innermost cell, when one exists."""
        cell = self.innermost_cell
        if cell is None:
            return None
        for idx in cell.touches:
            comp = self.components[idx]
            if comp.kind == "loop":
                return comp.region()
        return None


# ===== Degrees =====

def taylor_norms(f: ScalarField, x, y, max_order: int) -> np.ndarray:
    """c_k for k = 0..max_order at each point; shape (npoints, max_order + 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    norms = np.zeros((x.size, max_order + 1))
    for k in range(max_order + 1):
        for a in range(k + 1):
            b = k - a
            val = np.abs(f.derivative((a, b), x, y)) / (factorial(a) * factorial(b))
            norms[:, k] = np.fmax(norms[:, k], val)
    return norms


def _degrees_from_norms(norms: np.ndarray, tol_deg: float):
    lead = norms[:, 1:]
    scale = np.max(lead, axis=1)
    above = lead > tol_deg * scale[:, None]
    above &= scale[:, None] > 0
    has = np.any(above, axis=1)
    first = np.argmax(above, axis=1) + 1
    return np.where(has, first, 0), scale


def vanishing_degree(f: ScalarField, point, max_order: Optional[int] = None,
                     tol: Optional[Tolerances] = None) -> DegreeResult:
    """Smallest k >= 1 with a non-negligible k-th derivative at ``point``."""
    tol = tol or Tolerances()
    px, py = float(point[0]), float(point[1])
    if not bool(f.domain.contains(px, py)):
        raise DomainError(f"point {point} lies outside the {f.domain.kind} domain")
    K = f.max_order if max_order is None else min(int(max_order), f.max_order)
    norms = taylor_norms(f, px, py, K)
    deg, _ = _degrees_from_norms(norms, tol.tol_deg)
    d = int(deg[0])
    row = norms[0]
    if d == 0:
        return DegreeResult((px, py), None, True, 0.0, float("nan"), row.tolist())
    lower = row[1:d]
    conf = float(row[d] / lower.max()) if lower.size and lower.max() > 0 else float("inf")
    return DegreeResult((px, py), d, False, float(row[d]), conf, row.tolist())


def point_degrees(f: ScalarField, points: np.ndarray, tol: Optional[Tolerances] = None):
    """Vectorized degrees (None where K is exceeded)."""
    tol = tol or Tolerances()
    if len(points) == 0:
        return []
    norms = taylor_norms(f, points[:, 0], points[:, 1], f.max_order)
    deg, _ = _degrees_from_norms(norms, tol.tol_deg)
    return [int(d) if d else None for d in deg]


# ===== Geometry helpers =====

def _wrap(points: np.ndarray, domain: Domain) -> np.ndarray:
    if not domain.periodic:
        return points
    origin = np.asarray(domain.origin)
    widths = np.asarray(domain.widths)
    return origin + np.mod(points - origin, widths)


def _tree(points: np.ndarray, domain: Domain) -> cKDTree:
    if domain.periodic:
        rel = np.mod(points - np.asarray(domain.origin), np.asarray(domain.widths))
        # boxsize demands coordinates strictly below the width
        rel = np.where(rel >= np.asarray(domain.widths), 0.0, rel)
        return cKDTree(rel, boxsize=np.asarray(domain.widths))
    return cKDTree(points)


def _query_points(points: np.ndarray, domain: Domain) -> np.ndarray:
    if domain.periodic:
        rel = np.mod(points - np.asarray(domain.origin), np.asarray(domain.widths))
        return np.where(rel >= np.asarray(domain.widths), 0.0, rel)
    return points


def _label(mask: np.ndarray, periodic: bool, structure) -> Tuple[np.ndarray, int]:
    labels, count = ndimage.label(mask, structure=structure)
    if not periodic or count == 0:
        return labels, count
    pairs = []
    full = structure.sum() == 9
    for a, b in ((labels[:, 0], labels[:, -1]), (labels[0, :], labels[-1, :])):
        for shift in ((-1, 0, 1) if full else (0,)):
            bb = np.roll(b, shift)
            ok = (a > 0) & (bb > 0)
            pairs.extend(zip(a[ok].tolist(), bb[ok].tolist()))
    if not pairs:
        return labels, count
    rows, cols = zip(*pairs)
    graph = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(count + 1, count + 1))
    _, merged = connected_components(graph, directed=False)
    # relabel densely, keeping 0 as background
    remap = np.zeros(count + 1, dtype=int)
    seen = {}
    for lab in range(1, count + 1):
        root = merged[lab]
        if root not in seen:
            seen[root] = len(seen) + 1
        remap[lab] = seen[root]
    return remap[labels], len(seen)


def _eig_solve(hxx, hxy, hyy, gx, gy, rcond=1e-8):
    """Pseudo-inverse step pinv(H) g for a stack of symmetric 2x2 matrices."""
    H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
    w, V = np.linalg.eigh(H)
    cutoff = rcond * np.max(np.abs(w), axis=1, keepdims=True)
    keep = (np.abs(w) > cutoff) & (np.abs(w) > 0)
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    g = np.stack([gx, gy], -1)
    coeff = np.einsum("pji,pj->pi", V, g) * inv
    return np.einsum("pji,pi->pj", V, coeff)


def refine_critical_points(f: ScalarField, points: np.ndarray, h: float,
                           plain_steps: int = 6, max_steps: int = 40) -> np.ndarray:
    """Newton projection onto grad f = 0.

    After a few plain steps the multiplicity of each root is estimated from
    the contraction ratio of successive steps and the step is scaled by it,
    which restores fast convergence on degenerate curves.
    """
    p = points.astype(float).copy()
    last = None
    mult = np.ones(len(p))
    for it in range(max_steps):
        gx, gy = f.gradient(p[:, 0], p[:, 1])
        hxx, hxy, hyy = f.hessian(p[:, 0], p[:, 1])
        step = _eig_solve(hxx, hxy, hyy, gx, gy)
        step = np.nan_to_num(step)
        size = np.linalg.norm(step, axis=1)
        if it == plain_steps and last is not None:
            ratio = np.where(last > 0, size / np.maximum(last, 1e-300), 0.0)
            ratio = np.clip(ratio, 0.0, 0.95)
            mult = np.clip(np.rint(1.0 / (1.0 - ratio)), 1, max(f.max_order - 1, 1))
        step = step * mult[:, None]
        size = np.linalg.norm(step, axis=1)
        damp = np.minimum(1.0, 2 * h / np.maximum(size, 1e-300))
        p -= step * damp[:, None]
        last = np.linalg.norm(step / mult[:, None], axis=1)
        if np.all(size < 1e-15 * max(1.0, h)):
            break
    return p


def _dedupe(points: np.ndarray, radius: float, domain: Domain) -> np.ndarray:
    if len(points) < 2:
        return points
    tree = _tree(points, domain)
    pairs = tree.query_pairs(radius)
    drop = set()
    for i, j in sorted(pairs):
        if i not in drop:
            drop.add(j)
    keep = [i for i in range(len(points)) if i not in drop]
    return points[keep]


def _delta(a, b, domain):
    d = b - a
    if domain.periodic:
        w = np.asarray(domain.widths)
        d = d - w * np.round(d / w)
    return d


def _chain(points: np.ndarray, link: float, domain: Domain) -> List[np.ndarray]:
    """Split points into pieces joined within ``link`` and order each piece."""
    if len(points) == 0:
        return []
    tree = _tree(points, domain)
    pairs = np.array(sorted(tree.query_pairs(link)), dtype=int).reshape(-1, 2)
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, labels = connected_components(graph, directed=False)
    pieces = []
    for lab in range(count):
        idx = np.nonzero(labels == lab)[0]
        sub = points[idx]
        if len(sub) < 3:
            pieces.append(sub)
            continue
        # start at the point farthest from an arbitrary member, then walk greedily
        d0 = np.linalg.norm(_delta(sub[0], sub, domain), axis=1)
        start = int(np.argmax(d0))
        order = [start]
        remaining = set(range(len(sub))) - {start}
        while remaining:
            cur = sub[order[-1]]
            rest = np.array(sorted(remaining))
            dist = np.linalg.norm(_delta(cur, sub[rest], domain), axis=1)
            order.append(int(rest[np.argmin(dist)]))
            remaining.discard(order[-1])
        pieces.append(sub[order])
    return pieces


# ===== Critical set =====

def find_critical_set(f: ScalarField, resolution=128,
                      tol: Optional[Tolerances] = None) -> List[CriticalComponent]:
    """Trace {grad f = 0} on a grid.

    Returns isolated points (branch points flagged), arcs, loops and plateau
    components, each with per-point degrees. Components whose degree varies
    are flagged anomalous instead of being split.

    Raises:
        ResolutionError: Two distinct components lie within two cells.
    """
    tol = tol or Tolerances()
    domain = f.domain
    x, y = grid_nodes(domain, resolution)
    h = max(x[1] - x[0], y[1] - y[0])
    XX, YY = np.meshgrid(x, y)
    inside = domain.contains(XX, YY)
    px, py = XX[inside], YY[inside]
    gx, gy = f.gradient(px, py)
    hxx, hxy, hyy = f.hessian(px, py)
    gnorm = np.hypot(gx, gy)
    hnorm = np.sqrt(hxx ** 2 + 2 * hxy ** 2 + hyy ** 2)
    scale = max(float(np.nanmax(gnorm)), float(np.nanmax(hnorm)) * h, 1e-300)
    floor = tol.tol_deg * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        d_est = np.where(hnorm > 0, gnorm / hnorm, np.inf)
    flat_node = (gnorm <= floor) & (hnorm * h <= floor)
    cand_node = (d_est <= tol.critical_band * h) | (gnorm <= floor)

    cand = np.zeros(XX.shape, dtype=bool)
    cand[inside] = cand_node
    flat = np.zeros(XX.shape, dtype=bool)
    flat[inside] = flat_node
    labels, count = _label(cand, domain.periodic, np.ones((3, 3), bool))
    logger.debug("Critical candidates for %s: %d nodes in %d clusters", f.name,
                 int(cand.sum()), count)

    components: List[CriticalComponent] = []
    curve_points = []
    for lab in range(1, count + 1):
        sel = labels == lab
        nodes = np.column_stack([XX[sel], YY[sel]])
        if np.count_nonzero(flat[sel]) > 0.5 * len(nodes):
            components.append(CriticalComponent("plateau", nodes, [None] * len(nodes), True,
                                                spacing=h))
            continue
        refined = refine_critical_points(f, nodes, h)
        moved = np.linalg.norm(_delta(nodes, refined, domain), axis=1)
        refined = _wrap(refined[moved <= 3 * h], domain)
        if len(refined):
            refined = refined[domain.contains(refined[:, 0], refined[:, 1], tol=1e-9)]
        if not len(refined):
            continue
        degrees = point_degrees(f, refined, tol)
        good = np.array([d is not None and d >= 2 for d in degrees])
        refined = refined[good]
        if not len(refined):
            continue
        refined = _dedupe(refined, h / 4, domain)
        spread = np.max(np.linalg.norm(_delta(refined[0], refined, domain), axis=1))
        if spread <= 2 * h:
            gx_r, gy_r = f.gradient(refined[:, 0], refined[:, 1])
            best = refined[int(np.argmin(np.hypot(gx_r, gy_r)))]
            d = point_degrees(f, best[None, :], tol)
            components.append(CriticalComponent("isolated", best[None, :], d, True, spacing=h))
        else:
            curve_points.append(refined)

    for pts in curve_points:
        components.extend(_split_curve(f, pts, h, domain, tol))

    _check_separation(components, h, domain)
    kinds = {}
    for c in components:
        kinds[c.kind] = kinds.get(c.kind, 0) + 1
    logger.info("Critical set of %s: %s", f.name, kinds)
    return components


def _branch_points(f, pts, degrees, h, domain, tol):
    known = [d for d in degrees if d is not None]
    if not known:
        return np.empty((0, 2))
    dominant = max(set(known), key=known.count)
    norms = taylor_norms(f, pts[:, 0], pts[:, 1], min(f.max_order, dominant + 2))
    lead = norms[:, dominant]
    tree = _tree(pts, domain)
    median = float(np.median(lead))
    found = []
    for i, val in enumerate(lead):
        if val >= 0.5 * median:
            continue
        near = tree.query_ball_point(_query_points(pts[i:i + 1], domain)[0], 3 * h)
        if val > np.min(lead[near]):
            continue

        def objective(p):
            c = taylor_norms(f, p[0], p[1], dominant)[0]
            return sum(c[k] ** (1.0 / (dominant + 2 - k)) for k in range(1, dominant + 1))
        res = minimize(objective, pts[i], method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 400})
        cand = _wrap(res.x[None, :], domain)
        d = point_degrees(f, cand, tol)[0]
        if d is not None and d > dominant:
            found.append(cand[0])
    if not found:
        return np.empty((0, 2))
    return _dedupe(np.array(found), h, domain)


def _split_curve(f, pts, h, domain, tol) -> List[CriticalComponent]:
    degrees = point_degrees(f, pts, tol)
    branches = _branch_points(f, pts, degrees, h, domain, tol)
    out = []
    if len(branches):
        for b in branches:
            out.append(CriticalComponent("isolated", b[None, :], point_degrees(f, b[None, :], tol),
                                         True, branch=True, spacing=h))
        far = np.ones(len(pts), dtype=bool)
        for b in branches:
            far &= np.linalg.norm(_delta(b, pts, domain), axis=1) > 2.5 * h
        pts = pts[far]
    for piece in _chain(pts, 2.5 * h, domain):
        if len(piece) < 2:
            continue
        degs = point_degrees(f, piece, tol)
        known = [d for d in degs if d is not None]
        constant = len(set(known)) <= 1
        gap = np.linalg.norm(_delta(piece[-1], piece[0], domain))
        extent = np.max(np.linalg.norm(_delta(piece[0], piece, domain), axis=1))
        kind = "loop" if gap <= 2 * h and extent > 4 * h else "arc"
        if not constant:
            logger.warning("Critical curve with varying degree %s flagged anomalous",
                           sorted(set(known)))
        out.append(CriticalComponent(kind, piece, degs, constant, anomalous=not constant,
                                     spacing=h))
    return out


def _check_separation(components, h, domain):
    tested = [(i, c) for i, c in enumerate(components) if c.kind != "plateau" and not c.branch]
    for a in range(len(tested)):
        ia, ca = tested[a]
        tree = _tree(ca.points, domain)
        for b in range(a + 1, len(tested)):
            ib, cb = tested[b]
            dist, _ = tree.query(_query_points(cb.points, domain))
            if np.min(dist) < 2 * h:
                raise ResolutionError(
                    f"critical components {ia} ({ca.kind}) and {ib} ({cb.kind}) lie within two "
                    f"cells; increase the resolution")


# ===== Decomposition =====

def innermost_loop(components: List[CriticalComponent], domain: Domain,
                   resolution=256) -> RegionDecomposition:
    """Cells of the domain minus the critical walls, with the innermost one.

    Walls are critical curves and plateaus. The innermost cell touches a
    wall and its hole-filled hull contains no further wall; ties go to the
    smallest area. Without walls the whole domain is one cell flagged
    ``no_critical_curves``.

    Raises:
        DecompositionError: A component is anomalous.
    """
    bad = [i for i, c in enumerate(components) if c.anomalous]
    if bad:
        raise DecompositionError(f"anomalous critical components {bad} prevent a clean decomposition")
    x, y = grid_nodes(domain, resolution)
    h = max(x[1] - x[0], y[1] - y[0])
    XX, YY = np.meshgrid(x, y)
    inside = domain.contains(XX, YY)
    walls = [i for i, c in enumerate(components) if c.is_curve or c.kind == "plateau"]
    # branch points plug the gaps left where arcs were cut back
    plugs = [i for i, c in enumerate(components) if c.branch]
    nodes = np.column_stack([XX.ravel(), YY.ravel()])
    wall_of = np.full(XX.size, -1)
    if walls:
        members = walls + plugs
        wall_pts = np.vstack([components[i].points for i in members])
        owner = np.concatenate([[i] * len(components[i].points) for i in members])
        reach = np.concatenate([
            [(3.5 if components[i].branch else 1.5) * max(h, components[i].spacing)]
            * len(components[i].points) for i in members])
        dist, idx = _tree(wall_pts, domain).query(_query_points(nodes, domain))
        near = dist <= reach[idx]
        wall_of[near] = owner[idx[near]]
    wall_of = wall_of.reshape(XX.shape)
    free = inside & (wall_of < 0)
    labels, count = _label(free, domain.periodic, ndimage.generate_binary_structure(2, 1))
    labels = labels - 1  # cells from 0, -1 for walls and outside

    cells = []
    isolated = [i for i, c in enumerate(components) if c.kind == "isolated"]
    iso_cell = {}
    if isolated:
        tree = _tree(nodes, domain)
        for i in isolated:
            _, j = tree.query(_query_points(components[i].points, domain)[0])
            iso_cell[i] = int(labels.ravel()[j])
    area_unit = (x[1] - x[0]) * (y[1] - y[0])
    for cid in range(count):
        mask = labels == cid
        ring = ndimage.binary_dilation(mask, iterations=3)
        touched = sorted(set(wall_of[ring & (wall_of >= 0)].tolist()))
        jj, ii = np.nonzero(mask)
        k = int(np.argmin((ii - ii.mean()) ** 2 + (jj - jj.mean()) ** 2))
        cells.append(Cell(cid, int(mask.sum()), float(mask.sum() * area_unit), touched,
                          [i for i, c in iso_cell.items() if c == cid],
                          (float(x[ii[k]]), float(y[jj[k]]))))
    adjacency = sorted({(a.id, b.id) for a in cells for b in cells
                        if a.id < b.id and set(a.touches) & set(b.touches)})

    if not walls:
        logger.info("No critical curves: single cell")
        return RegionDecomposition(cells, adjacency, 0 if cells else None, True, labels, x, y,
                                   domain, components)
    candidates = []
    for cell in cells:
        if not cell.touches:
            continue
        mask = labels == cell.id
        filled = ndimage.binary_fill_holes(mask)
        if np.any(filled & ~mask & (wall_of >= 0)):
            continue
        candidates.append(cell)
    innermost = min(candidates, key=lambda c: (c.area, c.id)).id if candidates else None
    if innermost is None:
        logger.warning("No innermost cell found among %d cells", len(cells))
    return RegionDecomposition(cells, adjacency, innermost, False, labels, x, y, domain, components)


# ===== Checks =====

@dataclass
class DegreeRelationReport:
    curve_degree: int
    mode: str  # 'degree' or 'nonvanishing'
    points: List[Tuple[float, float]]
    measured: List[Optional[int]]
    laplacian_values: List[float]
    passed: List[bool]

    @property
    def all_passed(self) -> bool:
        return bool(self.passed) and all(self.passed)


def degree_relation_check(psi: ScalarField, component: CriticalComponent, samples: int = 16,
                          tol: Optional[Tolerances] = None) -> DegreeRelationReport:
    """Degree of the vorticity along a critical curve of constant degree d.

    For d >= 3 each sample must have degree(lap psi) = d - 2; for d = 2 the
    vorticity must be nonzero on the curve instead.
    """
    tol = tol or Tolerances()
    if not component.is_curve:
        raise ValueError("degree relation needs a critical curve")
    d = component.degree
    if d is None or d < 2:
        raise ValueError(f"curve must have constant degree >= 2, got {component.degrees[:4]}...")
    lap = psi.laplacian()
    idx = np.linspace(0, len(component.points) - 1, min(samples, len(component.points))).astype(int)
    pts = component.points[idx]
    values = lap(pts[:, 0], pts[:, 1])
    if d == 2:
        ref = max(float(np.max(np.abs(values))), 1e-300)
        passed = [bool(abs(v) > tol.tol_deg * ref) for v in values]
        measured = [None] * len(pts)
        mode = "nonvanishing"
    else:
        measured = point_degrees(lap, pts, tol)
        passed = [m == d - 2 for m in measured]
        mode = "degree"
    failed = passed.count(False)
    if failed:
        logger.warning("Degree relation failed at %d of %d samples", failed, len(passed))
    return DegreeRelationReport(d, mode, [tuple(map(float, p)) for p in pts], measured,
                                values.tolist(), passed)


@dataclass
class RadialityVerdict:
    cell: int
    verdict: str  # radial, non-radial, too-thin
    center: Optional[Tuple[float, float]]
    deviation: float
    circles: int


def detect_local_radiality(psi: ScalarField, decomposition: RegionDecomposition,
                           tol: Optional[Tolerances] = None, angles: int = 64) -> List[RadialityVerdict]:
    """Per-cell test for radial symmetry about a fitted center."""
    tol = tol or Tolerances()
    x, y = decomposition.x, decomposition.y
    h = max(x[1] - x[0], y[1] - y[0])
    XX, YY = np.meshgrid(x, y)
    domain = decomposition.domain
    theta = 2 * np.pi * np.arange(angles) / angles
    ring = np.column_stack([np.cos(theta), np.sin(theta)])
    results = []
    for cell in decomposition.cells:
        mask = decomposition.labels == cell.id
        cx, cy = XX[mask], YY[mask]
        values = psi(cx, cy)
        k = int(np.argmax(np.abs(values)))
        start = np.array([cx[k], cy[k]])
        others = np.column_stack([XX[~mask], YY[~mask]])
        extra = [decomposition.components[i].points[0] for i in cell.isolated]
        extra = [p for p in extra if np.linalg.norm(_delta(start, p, domain)) > 2 * h]
        if extra:
            others = np.vstack([others] + [np.asarray(e)[None, :] for e in extra])
        if len(others):
            inradius = float(_tree(others, domain).query(_query_points(start[None, :], domain))[0][0])
        else:
            xmin, xmax, ymin, ymax = domain.bounding_box()
            inradius = 0.5 * min(xmax - xmin, ymax - ymin)
        radii = np.arange(1, int(0.9 * inradius / h) + 1) * h
        if len(radii) < 8:
            logger.warning("Cell %d too thin for a radiality test (%d circles)", cell.id, len(radii))
            results.append(RadialityVerdict(cell.id, "too-thin", None, float("nan"), len(radii)))
            continue

        def spread(c, reduce):
            pts = c[None, None, :] + radii[:, None, None] * ring[None, :, :]
            vals = psi(pts[..., 0], pts[..., 1])
            return reduce(vals)

        def variance(c):
            return float(np.sum(np.var(spread(c, lambda v: v), axis=1)))
        res = minimize(variance, start, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-32, "maxiter": 600})
        center = res.x
        deviation = float(spread(center, lambda v: np.max(np.ptp(v, axis=1))))
        limit = tol.tol_rad * max(float(np.max(np.abs(values))), 1e-300)
        verdict = "radial" if deviation <= limit else "non-radial"
        logger.debug("Cell %d: %s about %s (deviation %.2e)", cell.id, verdict, center, deviation)
        results.append(RadialityVerdict(cell.id, verdict, (float(center[0]), float(center[1])),
                                        deviation, len(radii)))
    return results
