"""Bounded regions used by the boundary checks and the moving plane.

A region is a set of closed boundary loops (outer loop first, holes after)
with optional exact membership, distance and boundary-sample callables.
Without them, membership uses the even-odd rule on the loops and distance
is the exact distance to the polyline (nearest vertices from a k-d tree,
then projection onto the adjacent segments).
"""
from dataclasses import dataclass, field as dc_field
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from steadyflow.errors import DomainError
from steadyflow.fields import Domain
from steadyflow.level_sets import points_in_polygon, polygon_area

logger = logging.getLogger(__name__)

_KNN = 8


def _ccw(loop: np.ndarray) -> np.ndarray:
    return loop if polygon_area(loop) >= 0 else loop[::-1].copy()


@dataclass
class Region:
    """Bounded open set described by boundary loops.

    Attributes:
        loops: Closed polylines, outer loop first (counterclockwise).
        name: Label for reports.
        exact_contains / exact_filled / exact_distance: Optional closed-form
            replacements for the polyline versions.
        exact_samples: Optional ``count -> (points, outward normals)``.
        exact_support: Optional ``e -> (min, max)`` of ``x·e`` over the region.
    """
    loops: List[np.ndarray]
    name: str = "region"
    exact_contains: Optional[Callable] = None
    exact_filled: Optional[Callable] = None
    exact_distance: Optional[Callable] = None
    exact_samples: Optional[Callable] = None
    exact_support: Optional[Callable] = None
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if not self.loops:
            raise DomainError("a region needs at least one boundary loop")
        self.loops = [np.asarray(self.loops[0], dtype=float)] + [np.asarray(l, dtype=float)
                                                                  for l in self.loops[1:]]
        self.loops[0] = _ccw(self.loops[0])
        seg_a, seg_b = [], []
        for loop in self.loops:
            seg_a.append(loop)
            seg_b.append(np.roll(loop, -1, axis=0))
        self._seg_a = np.vstack(seg_a)
        self._seg_b = np.vstack(seg_b)
        self._tree = cKDTree(self._seg_a)

    # -- constructors --
    @classmethod
    def from_domain(cls, domain: Domain, count: int = 1024) -> "Region":
        if domain.periodic:
            raise DomainError("the periodic rectangle is not a bounded region")
        loops = domain.boundary_loops(count)
        if domain.kind in ("disk", "annulus"):
            c = np.asarray(domain.center)
            R = domain.radius if domain.kind == "disk" else domain.r_out

            def filled(x, y):
                return np.hypot(np.asarray(x) - c[0], np.asarray(y) - c[1]) <= R * (1 + 1e-12)

            def samples(n):
                t = 2 * np.pi * np.arange(n) / n
                normals = np.column_stack([np.cos(t), np.sin(t)])
                return c + R * normals, normals

            def support(e):
                ce = float(np.dot(c, e))
                return ce - R, ce + R
            return cls(loops, domain.kind, exact_contains=domain.contains, exact_filled=filled,
                       exact_distance=domain.boundary_distance, exact_samples=samples,
                       exact_support=support)
        return cls(loops, domain.kind, exact_contains=domain.contains,
                   exact_distance=domain.boundary_distance)

    @classmethod
    def from_polyline(cls, points: np.ndarray, name: str = "loop") -> "Region":
        return cls([np.asarray(points, dtype=float)], name)

    @classmethod
    def near_curve(cls, chart, width: float, count: int = 1024) -> "Region":
        """Tube ``|n| < width`` around a chart's core curve; distance is to the curve."""
        if not 0 < width <= chart.delta:
            raise DomainError(f"width must lie in (0, {chart.delta}], got {width}")

        def contains(x, y):
            _, n = chart.to_fermi(x, y)
            return np.abs(n) < width

        def distance(x, y):
            _, n = chart.to_fermi(x, y)
            return np.abs(n)

        def samples(n):
            s = chart.curve.length * np.arange(n) / n
            return chart.curve.point(s), chart.curve.normal(s)
        core = chart.offset_curve(0.0, count)
        return cls([core], "near-curve", exact_contains=contains, exact_distance=distance,
                   exact_samples=samples, metadata={"width": width})

    # -- queries --
    @property
    def outer(self) -> np.ndarray:
        return self.loops[0]

    def contains(self, x, y):
        if self.exact_contains is not None:
            return np.asarray(self.exact_contains(x, y), dtype=bool)
        inside = points_in_polygon(x, y, self.loops[0])
        for hole in self.loops[1:]:
            inside &= ~points_in_polygon(x, y, hole)
        return inside

    def filled_contains(self, x, y):
        """Membership in the region with its holes filled in."""
        if self.exact_filled is not None:
            return np.asarray(self.exact_filled(x, y), dtype=bool)
        if len(self.loops) == 1 and self.exact_contains is not None:
            return self.contains(x, y)
        return points_in_polygon(x, y, self.loops[0])

    def boundary_distance(self, x, y):
        if self.exact_distance is not None:
            return np.asarray(self.exact_distance(x, y), dtype=float)
        return self.polyline_distance(x, y)

    def polyline_distance(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        q = np.column_stack([np.broadcast_to(x, shape).ravel(), np.broadcast_to(y, shape).ravel()])
        k = min(_KNN, len(self._seg_a))
        _, idx = self._tree.query(q, k=k)
        idx = np.atleast_2d(idx)
        if idx.shape[0] != q.shape[0]:
            idx = idx.T
        # segments starting at the nearest vertices and ending at them
        prev = np.concatenate([np.roll(np.arange(len(l)), 1) + off
                               for l, off in zip(self.loops, np.cumsum([0] + [len(l) for l in self.loops[:-1]]))])
        cand = np.concatenate([idx, prev[idx]], axis=1)
        a = self._seg_a[cand]
        b = self._seg_b[cand]
        ab = b - a
        t = np.einsum("pkj,pkj->pk", q[:, None, :] - a, ab) / np.maximum(np.einsum("pkj,pkj->pk", ab, ab), 1e-300)
        t = np.clip(t, 0.0, 1.0)
        proj = a + t[..., None] * ab
        dist = np.min(np.linalg.norm(q[:, None, :] - proj, axis=-1), axis=1)
        return dist.reshape(shape)

    def boundary_samples(self, count: int = 512) -> Tuple[np.ndarray, np.ndarray]:
        """Boundary points and outward unit normals."""
        if self.exact_samples is not None:
            return self.exact_samples(count)
        pts, normals = [], []
        for i, loop in enumerate(self.loops):
            tangent = np.roll(loop, -1, axis=0) - np.roll(loop, 1, axis=0)
            tangent /= np.linalg.norm(tangent, axis=1)[:, None]
            outward = np.column_stack([tangent[:, 1], -tangent[:, 0]])
            if i > 0 and polygon_area(loop) > 0:
                # counterclockwise hole: flip so normals leave the region
                outward = -outward
            pts.append(loop)
            normals.append(outward)
        pts = np.vstack(pts)
        normals = np.vstack(normals)
        step = max(1, len(pts) // count)
        return pts[::step], normals[::step]

    def support(self, e) -> Tuple[float, float]:
        """(min, max) of ``x·e`` over the region."""
        e = np.asarray(e, dtype=float)
        if self.exact_support is not None:
            return self.exact_support(e)
        proj = self.outer @ e
        return float(proj.min()), float(proj.max())

    def bounding_box(self):
        pts = self.outer
        return (float(pts[:, 0].min()), float(pts[:, 0].max()),
                float(pts[:, 1].min()), float(pts[:, 1].max()))

    def interior_grid(self, resolution: int = 128):
        """Node coordinates of a uniform grid restricted to the region."""
        xmin, xmax, ymin, ymax = self.bounding_box()
        x = np.linspace(xmin, xmax, resolution)
        y = np.linspace(ymin, ymax, resolution)
        XX, YY = np.meshgrid(x, y)
        inside = self.contains(XX, YY)
        return XX[inside], YY[inside]
