"""Marching-squares level sets on node grids, plus polygon helpers.

Saddle cells are resolved with the mean of the four corners. Segments are
chained through shared cell edges, so every returned polyline is either a
closed loop or an open curve ending on the grid border or a masked cell.
"""
from dataclasses import dataclass
import logging
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import directed_hausdorff

logger = logging.getLogger(__name__)

# Edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3)
# Corner bits: c0 (i,j) = 1, c1 (i+1,j) = 2, c2 (i+1,j+1) = 4, c3 (i,j+1) = 8
_SEGMENTS = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 6: [(0, 2)], 7: [(3, 2)],
    8: [(2, 3)], 9: [(0, 2)], 11: [(1, 2)], 12: [(3, 1)], 13: [(0, 1)], 14: [(3, 0)],
}
_SADDLES = {
    # (center above level, center below level)
    5: ([(0, 1), (2, 3)], [(3, 0), (1, 2)]),
    10: ([(3, 0), (1, 2)], [(0, 1), (2, 3)]),
}


@dataclass
class Contour:
    """One connected piece of a level set."""
    points: np.ndarray
    closed: bool
    level: float

    def __len__(self):
        return len(self.points)

    @property
    def length(self) -> float:
        pts = self.points
        seg = np.diff(np.vstack([pts, pts[:1]]) if self.closed else pts, axis=0)
        return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


def lerp_point(p0, p1, v0, v1, level):
    """Point on segment p0-p1 where the linear interpolant equals ``level``."""
    t = (level - v0) / (v1 - v0)
    return (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))


def _edge_key(edge, i, j, nx, ny, periodic):
    if edge == 0:
        key = ("h", i, j)
    elif edge == 2:
        key = ("h", i, j + 1)
    elif edge == 3:
        key = ("v", i, j)
    else:
        key = ("v", i + 1, j)
    if periodic:
        return (key[0], key[1] % nx, key[2] % ny)
    return key


def find_contours(values: np.ndarray, x: np.ndarray, y: np.ndarray, level: float,
                  periodic: bool = False) -> List[Contour]:
    """Level set ``{values == level}`` as chained polylines.

    Args:
        values: Node values of shape (ny, nx); NaN marks unusable nodes.
        x, y: Node coordinates along each axis.
        level: Contour level.
        periodic: Wrap cells across the grid border (torus grids).
    """
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    dx = x[1] - x[0]
    dy = y[1] - y[0]
    if periodic:
        v00 = values
        v10 = np.roll(values, -1, axis=1)
        v11 = np.roll(np.roll(values, -1, axis=1), -1, axis=0)
        v01 = np.roll(values, -1, axis=0)
    else:
        v00 = values[:-1, :-1]
        v10 = values[:-1, 1:]
        v11 = values[1:, 1:]
        v01 = values[1:, :-1]
    finite = np.isfinite(v00) & np.isfinite(v10) & np.isfinite(v11) & np.isfinite(v01)
    case = ((v00 > level).astype(int) | (v10 > level) * 2 | (v11 > level) * 4 | (v01 > level) * 8)
    case[~finite] = 0
    active_j, active_i = np.nonzero((case != 0) & (case != 15))

    points: Dict[tuple, Tuple[float, float]] = {}
    links: Dict[tuple, List[tuple]] = {}
    for j, i in zip(active_j.tolist(), active_i.tolist()):
        c = int(case[j, i])
        corner_vals = (v00[j, i], v10[j, i], v11[j, i], v01[j, i])
        if c in _SADDLES:
            high, low = _SADDLES[c]
            segs = high if np.mean(corner_vals) > level else low
        else:
            segs = _SEGMENTS[c]
        xs = (x[0] + i * dx, x[0] + (i + 1) * dx)
        ys = (y[0] + j * dy, y[0] + (j + 1) * dy)
        corners = ((xs[0], ys[0]), (xs[1], ys[0]), (xs[1], ys[1]), (xs[0], ys[1]))
        ends = {0: (0, 1), 1: (1, 2), 2: (3, 2), 3: (0, 3)}
        for a, b in segs:
            keys = []
            for edge in (a, b):
                key = _edge_key(edge, i, j, nx, ny, periodic)
                if key not in points:
                    ca, cb = ends[edge]
                    points[key] = lerp_point(corners[ca], corners[cb], corner_vals[ca],
                                             corner_vals[cb], level)
                keys.append(key)
            links.setdefault(keys[0], []).append(keys[1])
            links.setdefault(keys[1], []).append(keys[0])

    contours = []
    seen = set()
    # open chains first, starting from their endpoints
    starts = [k for k, v in links.items() if len(v) == 1] + list(links)
    for start in starts:
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        prev, cur = None, start
        closed = False
        while True:
            nxt = [k for k in links[cur] if k != prev]
            if not nxt:
                break
            step = nxt[0]
            if step == start:
                closed = True
                break
            if step in seen:
                break
            chain.append(step)
            seen.add(step)
            prev, cur = cur, step
        pts = np.array([points[k] for k in chain])
        if periodic and len(pts) > 1:
            pts = _unwrap(pts, (nx * dx, ny * dy))
        if len(pts) >= 2:
            contours.append(Contour(pts, closed, float(level)))
    return contours


def _unwrap(pts, widths):
    out = pts.copy()
    for axis, width in enumerate(widths):
        jumps = np.diff(out[:, axis])
        shift = -width * np.round(jumps / width)
        out[1:, axis] += np.cumsum(shift)
    return out


# ===== Polygon helpers =====

def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area (positive for counterclockwise loops)."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def points_in_polygon(px, py, polygon: np.ndarray) -> np.ndarray:
    """Even-odd rule membership, vectorized over the query points."""
    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    x0, y0 = polygon[:, 0], polygon[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(np.broadcast(px, py).shape, dtype=bool)
    for a, b, c, d in zip(x0, y0, x1, y1):
        crosses = (b > py) != (d > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = a + (py - b) * (c - a) / (d - b)
        inside ^= crosses & (px < xint)
    return inside


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def match_components(previous: Sequence[np.ndarray], current: Sequence[np.ndarray],
                     threshold: float = np.inf) -> List[Tuple[int, int]]:
    """Pair components of two level sets by symmetric Hausdorff distance.

    Optimal assignment on the distance matrix; pairs farther apart than
    ``threshold`` are dropped.
    """
    if not len(previous) or not len(current):
        return []
    cost = np.array([[hausdorff(p, c) for c in current] for p in previous])
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if cost[r, c] <= threshold]
