"""Domains and scalar fields with high-order derivative access.

Everything downstream (operators, critical sets, flux extraction, the
moving plane) talks to a ``ScalarField``: a vectorized evaluator plus
``derivative(alpha, x, y)`` for multi-indices up to the field's order cap.

Three families implement it:

- ``SymbolicField``: closed forms differentiated exactly with sympy and
  compiled with ``lambdify`` (catalog entries).
- ``GridField``: samples on a uniform grid read back through a
  tensor-product local polynomial of degree ``interp_order``.
- combinators (``DerivativeField``, ``SumField``, ``ProductField``) used by
  the operators, plus the series field exported by the counterexample
  module.
"""
from dataclasses import dataclass, field as dc_field
from math import comb
import logging
import re
import threading
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from steadyflow.errors import (DerivativeOrderError, DomainError,
                               ResolutionError, SpecParseError)
from steadyflow.stencils import lagrange_weights

logger = logging.getLogger(__name__)

# Shared symbols for every closed form in the package
X, Y = sp.symbols("x y", real=True)

DOMAIN_KINDS = ("periodic-rectangle", "disk", "annulus", "jordan-tube")


def _as_arrays(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.broadcast_arrays(x, y)


# ===== Domains =====

@dataclass(frozen=True)
class Domain:
    """A 2D domain: torus cell, disk, annulus or tube around a Jordan curve.

    For ``jordan-tube`` the ``chart`` attribute is a Fermi chart (see
    ``steadyflow.counterexample.FermiChart``) providing ``to_fermi``,
    ``delta``, ``bounding_box`` and ``offset_curve``.
    """
    kind: str
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0
    r_in: float = 0.0
    r_out: float = 0.0
    origin: Tuple[float, float] = (0.0, 0.0)
    widths: Tuple[float, float] = (2 * np.pi, 2 * np.pi)
    chart: object = dc_field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in DOMAIN_KINDS:
            raise DomainError(f"unknown domain kind {self.kind!r}; expected one of {DOMAIN_KINDS}")
        if self.kind == "disk" and not self.radius > 0:
            raise DomainError(f"disk radius must be > 0, got {self.radius}")
        if self.kind == "annulus" and not (0 <= self.r_in < self.r_out):
            raise DomainError(f"annulus needs 0 <= r_in < r_out, got {self.r_in}, {self.r_out}")
        if self.kind == "periodic-rectangle" and not (self.widths[0] > 0 and self.widths[1] > 0):
            raise DomainError(f"torus widths must be positive, got {self.widths}")
        if self.kind == "jordan-tube":
            if self.chart is None:
                raise DomainError("jordan-tube domain needs a Fermi chart")
            if not self.chart.delta > 0:
                raise DomainError("tube half-width must be > 0")

    # -- constructors --
    @classmethod
    def periodic_rectangle(cls, lx=2 * np.pi, ly=2 * np.pi, origin=(0.0, 0.0)):
        return cls("periodic-rectangle", origin=tuple(map(float, origin)),
                   widths=(float(lx), float(ly)))

    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("disk", center=tuple(map(float, center)), radius=float(radius))

    @classmethod
    def annulus(cls, center=(0.0, 0.0), r_in=0.5, r_out=1.0):
        return cls("annulus", center=tuple(map(float, center)), r_in=float(r_in),
                   r_out=float(r_out))

    @classmethod
    def jordan_tube(cls, chart):
        return cls("jordan-tube", chart=chart)

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic-rectangle"

    def _radius_of(self, x, y):
        return np.hypot(x - self.center[0], y - self.center[1])

    def contains(self, x, y, tol=1e-12):
        x, y = _as_arrays(x, y)
        if self.kind == "periodic-rectangle":
            return np.ones(x.shape, dtype=bool)
        if self.kind == "disk":
            return self._radius_of(x, y) <= self.radius * (1 + tol)
        if self.kind == "annulus":
            r = self._radius_of(x, y)
            return (r >= self.r_in * (1 - tol)) & (r <= self.r_out * (1 + tol))
        _, n = self.chart.to_fermi(x, y)
        return np.abs(n) <= self.chart.delta * (1 + tol)

    def bounding_box(self):
        """(xmin, xmax, ymin, ymax)."""
        if self.kind == "periodic-rectangle":
            x0, y0 = self.origin
            return (x0, x0 + self.widths[0], y0, y0 + self.widths[1])
        if self.kind in ("disk", "annulus"):
            r = self.radius if self.kind == "disk" else self.r_out
            cx, cy = self.center
            return (cx - r, cx + r, cy - r, cy + r)
        return self.chart.bounding_box()

    def boundary_loops(self, count=1024):
        """Closed boundary curves as (count, 2) arrays, outer loop first."""
        theta = 2 * np.pi * np.arange(count) / count
        circle = np.column_stack([np.cos(theta), np.sin(theta)])
        c = np.asarray(self.center)
        if self.kind == "disk":
            return [c + self.radius * circle]
        if self.kind == "annulus":
            loops = [c + self.r_out * circle]
            if self.r_in > 0:
                loops.append(c + self.r_in * circle)
            return loops
        if self.kind == "jordan-tube":
            d = self.chart.delta
            return [self.chart.offset_curve(d, count), self.chart.offset_curve(-d, count)]
        return []

    def boundary_distance(self, x, y):
        """Exact distance to the boundary (infinite on the torus)."""
        x, y = _as_arrays(x, y)
        if self.kind == "periodic-rectangle":
            return np.full(x.shape, np.inf)
        if self.kind == "disk":
            return np.abs(self.radius - self._radius_of(x, y))
        if self.kind == "annulus":
            r = self._radius_of(x, y)
            dist = np.abs(self.r_out - r)
            if self.r_in > 0:
                dist = np.minimum(dist, np.abs(r - self.r_in))
            return dist
        _, n = self.chart.to_fermi(x, y)
        return np.abs(self.chart.delta - np.abs(n))

    def describe(self) -> dict:
        if self.kind == "periodic-rectangle":
            return {"kind": self.kind, "origin": list(self.origin), "widths": list(self.widths)}
        if self.kind == "disk":
            return {"kind": self.kind, "center": list(self.center), "radius": self.radius}
        if self.kind == "annulus":
            return {"kind": self.kind, "center": list(self.center), "r_in": self.r_in,
                    "r_out": self.r_out}
        return {"kind": self.kind, "delta": self.chart.delta, "curve": self.chart.curve.describe()}


# ===== Scalar fields =====

class ScalarField:
    """Interface shared by every field: evaluation plus derivative access.

    Args:
        domain: The ``Domain`` the field lives on.
        max_order: Largest total derivative order available (K).
        source: One of 'catalog', 'grid', 'series', 'derived'.
        name: Label used in reports.
        metadata: Free-form ground truth and provenance.
    """

    def __init__(self, domain: Domain, max_order: int, source: str, name: str = "field",
                 metadata: Optional[dict] = None):
        self.domain = domain
        self.max_order = int(max_order)
        self.source = source
        self.name = name
        self.metadata = dict(metadata or {})

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, K={self.max_order})"

    def check_order(self, alpha):
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != 2 or min(alpha) < 0:
            raise DerivativeOrderError(f"multi-index must be two non-negative ints, got {alpha}")
        if sum(alpha) > self.max_order:
            raise DerivativeOrderError(
                f"order {sum(alpha)} exceeds the cap K={self.max_order} of {self.name}")
        return alpha

    def derivative(self, alpha, x, y):
        """Vectorized ∂^alpha of the field at (x, y)."""
        alpha = self.check_order(alpha)
        x, y = _as_arrays(x, y)
        return self._derivative(alpha, x, y)

    def _derivative(self, alpha, x, y):
        raise NotImplementedError

    def __call__(self, x, y):
        return self.derivative((0, 0), x, y)

    def gradient(self, x, y):
        return self.derivative((1, 0), x, y), self.derivative((0, 1), x, y)

    def hessian(self, x, y):
        return (self.derivative((2, 0), x, y), self.derivative((1, 1), x, y),
                self.derivative((0, 2), x, y))

    def partial(self, alpha) -> "ScalarField":
        return DerivativeField(self, alpha)

    def laplacian(self) -> "ScalarField":
        """Δ of the field; subclasses with a better formula override this."""
        return SumField([(1.0, DerivativeField(self, (2, 0))), (1.0, DerivativeField(self, (0, 2)))],
                        name=f"lap({self.name})")


class SymbolicField(ScalarField):
    """Closed form in ``x, y``, differentiated exactly and compiled lazily."""

    def __init__(self, expr, domain: Domain, name: str = "symbolic", metadata=None, max_order=8):
        super().__init__(domain, max_order, "catalog", name, metadata)
        self.expr = sp.sympify(expr)
        if self.expr.free_symbols - {X, Y}:
            raise ValueError(f"closed form has unbound symbols {self.expr.free_symbols - {X, Y}}")
        self._exprs: Dict[Tuple[int, int], sp.Expr] = {(0, 0): self.expr}
        self._compiled = {}
        self._lock = threading.RLock()

    def expression(self, alpha) -> sp.Expr:
        alpha = tuple(alpha)
        with self._lock:
            if alpha not in self._exprs:
                a, b = alpha
                # build from a cached lower derivative when there is one
                lower_x = self._exprs.get((a - 1, b)) if a > 0 else None
                lower_y = self._exprs.get((a, b - 1)) if b > 0 else None
                if lower_x is not None:
                    self._exprs[alpha] = sp.diff(lower_x, X)
                elif lower_y is not None:
                    self._exprs[alpha] = sp.diff(lower_y, Y)
                else:
                    self._exprs[alpha] = sp.diff(self.expr, X, a, Y, b)
            return self._exprs[alpha]

    def _compile(self, alpha):
        fn = self._compiled.get(alpha)
        if fn is None:
            expr = self.expression(alpha)
            fn = sp.lambdify((X, Y), expr, modules="numpy")
            with self._lock:
                self._compiled[alpha] = fn
        return fn

    def _derivative(self, alpha, x, y):
        fn = self._compile(alpha)
        with np.errstate(all="ignore"):
            out = fn(x, y)
        return np.array(np.broadcast_to(np.asarray(out, dtype=float), x.shape))

    def laplacian(self) -> "SymbolicField":
        lap = sp.diff(self.expr, X, 2) + sp.diff(self.expr, Y, 2)
        return SymbolicField(lap, self.domain, name=f"lap({self.name})",
                             max_order=max(self.max_order - 2, 0))

    def compose(self, phi, name=None) -> "SymbolicField":
        """phi∘f for a sympy-callable phi (e.g. ``sp.exp`` or a Lambda)."""
        return SymbolicField(phi(self.expr), self.domain, name=name or f"phi({self.name})",
                             max_order=self.max_order)

    def rotated(self, angle, about=(0.0, 0.0), domain=None) -> "SymbolicField":
        """The field f∘R where R rotates by ``angle`` about ``about``."""
        cx, cy = about
        c, s = sp.cos(angle), sp.sin(angle)
        u, v = X - cx, Y - cy
        expr = self.expr.subs({X: cx + c * u - s * v, Y: cy + s * u + c * v}, simultaneous=True)
        return SymbolicField(expr, domain or self.domain, name=f"rot({self.name})",
                             max_order=self.max_order)


class DerivativeField(ScalarField):
    """∂^shift of a base field, itself differentiable to K - |shift|."""

    def __init__(self, base: ScalarField, shift):
        shift = tuple(int(s) for s in shift)
        super().__init__(base.domain, base.max_order - sum(shift), "derived",
                         f"d{shift}({base.name})")
        self.base = base
        self.shift = shift

    def _derivative(self, alpha, x, y):
        return self.base.derivative((alpha[0] + self.shift[0], alpha[1] + self.shift[1]), x, y)


class SumField(ScalarField):
    """Linear combination Σ c_i f_i."""

    def __init__(self, terms: Sequence[Tuple[float, ScalarField]], name="sum"):
        terms = list(terms)
        if not terms:
            raise ValueError("SumField needs at least one term")
        super().__init__(terms[0][1].domain, min(f.max_order for _, f in terms), "derived", name)
        self.terms = terms

    def _derivative(self, alpha, x, y):
        out = np.zeros(x.shape)
        for coef, f in self.terms:
            out = out + coef * f.derivative(alpha, x, y)
        return out


class ProductField(ScalarField):
    """Pointwise product, differentiated with the Leibniz rule."""

    def __init__(self, f: ScalarField, g: ScalarField, name=None):
        super().__init__(f.domain, min(f.max_order, g.max_order), "derived",
                         name or f"({f.name})*({g.name})")
        self.f = f
        self.g = g

    def _derivative(self, alpha, x, y):
        a, b = alpha
        out = np.zeros(x.shape)
        for i in range(a + 1):
            for j in range(b + 1):
                w = comb(a, i) * comb(b, j)
                out = out + w * self.f.derivative((i, j), x, y) * self.g.derivative((a - i, b - j), x, y)
        return out


class GridField(ScalarField):
    """Samples on a uniform grid with local tensor-product interpolation.

    ``values`` has shape (ny, nx), row-major in y. Masked nodes hold NaN;
    interpolation stencils that touch them return NaN.
    """

    def __init__(self, values, x_nodes, y_nodes, domain: Domain, mask=None, name="grid",
                 metadata=None, max_order=4, interp_order=6):
        super().__init__(domain, max_order, "grid", name, metadata)
        self.values = np.asarray(values, dtype=float)
        self.x_nodes = np.asarray(x_nodes, dtype=float)
        self.y_nodes = np.asarray(y_nodes, dtype=float)
        ny, nx = self.values.shape
        if nx != self.x_nodes.size or ny != self.y_nodes.size:
            raise ValueError("grid values do not match node vectors")
        self.mask = np.zeros(self.values.shape, dtype=bool) if mask is None else np.asarray(mask, bool)
        self.npts = int(interp_order) + 1
        if min(nx, ny) < self.npts:
            raise ResolutionError(f"grid {nx}x{ny} smaller than the interpolation stencil")
        self.dx = (self.x_nodes[-1] - self.x_nodes[0]) / (nx - 1)
        self.dy = (self.y_nodes[-1] - self.y_nodes[0]) / (ny - 1)
        self.periodic = domain.periodic

    @property
    def shape(self):
        return self.values.shape

    def _axis_stencil(self, u, n, deriv):
        half = self.npts // 2
        fl = np.floor(u)
        if self.periodic:
            start = fl.astype(int) - half
            t = u - start
            idx = (start[:, None] + np.arange(self.npts)[None, :]) % n
        else:
            start = np.clip(fl.astype(int) - half, 0, n - self.npts)
            t = u - start
            idx = start[:, None] + np.arange(self.npts)[None, :]
        return lagrange_weights(t, self.npts, deriv), idx

    def _derivative(self, alpha, x, y):
        shape = x.shape
        xf = x.ravel()
        yf = y.ravel()
        ny, nx = self.values.shape
        u = (xf - self.x_nodes[0]) / self.dx
        v = (yf - self.y_nodes[0]) / self.dy
        wx, ix = self._axis_stencil(u, nx, alpha[0])
        wy, iy = self._axis_stencil(v, ny, alpha[1])
        block = self.values[iy[:, :, None], ix[:, None, :]]
        with np.errstate(invalid="ignore"):
            out = np.einsum("pj,pi,pji->p", wy, wx, block)
        if alpha == (0, 0):
            # bit-exact read-back on nodes
            hot = (np.count_nonzero(wx, axis=1) == 1) & (np.count_nonzero(wy, axis=1) == 1)
            if np.any(hot):
                jx = ix[hot, np.argmax(wx[hot], axis=1)]
                jy = iy[hot, np.argmax(wy[hot], axis=1)]
                out[hot] = self.values[jy, jx]
        out = out / (self.dx ** alpha[0] * self.dy ** alpha[1])
        return out.reshape(shape)

    def node_coordinates(self):
        return np.meshgrid(self.x_nodes, self.y_nodes)


# ===== Operations =====

def grid_nodes(domain: Domain, resolution):
    """Node vectors covering the domain's bounding box."""
    nx, ny = (resolution, resolution) if np.isscalar(resolution) else resolution
    nx, ny = int(nx), int(ny)
    if nx < 16 or ny < 16:
        raise ResolutionError(f"resolution must be at least 16x16, got {nx}x{ny}")
    xmin, xmax, ymin, ymax = domain.bounding_box()
    if domain.periodic:
        x = xmin + (xmax - xmin) * np.arange(nx) / nx
        y = ymin + (ymax - ymin) * np.arange(ny) / ny
    else:
        x = np.linspace(xmin, xmax, nx)
        y = np.linspace(ymin, ymax, ny)
    return x, y


def sample_grid(field: ScalarField, resolution, interp_order=6, max_order=4) -> GridField:
    """Sample ``field`` on a uniform grid; nodes outside the domain are masked."""
    x, y = grid_nodes(field.domain, resolution)
    XX, YY = np.meshgrid(x, y)
    inside = field.domain.contains(XX, YY)
    if not np.any(inside):
        raise DomainError("grid does not intersect the domain")
    values = np.full(XX.shape, np.nan)
    values[inside] = field(XX[inside], YY[inside])
    logger.debug("Sampled %s on %dx%d grid (%d masked)", field.name, x.size, y.size,
                 int(np.count_nonzero(~inside)))
    return GridField(values, x, y, field.domain, mask=~inside, name=f"{field.name}@grid",
                     metadata=field.metadata, max_order=max_order, interp_order=interp_order)


def derivative(field: ScalarField, alpha, point) -> float:
    """∂^alpha field at a single point, with order and membership checks."""
    alpha = field.check_order(alpha)
    px, py = float(point[0]), float(point[1])
    if not bool(field.domain.contains(px, py)):
        raise DomainError(f"point {point} lies outside the {field.domain.kind} domain")
    return float(field.derivative(alpha, px, py))


# ===== Field specification text =====

@dataclass(frozen=True)
class FieldSpec:
    name: str
    params: Tuple[Tuple[str, object], ...] = ()
    domain: Tuple[Tuple[str, object], ...] = ()

    @property
    def param_dict(self) -> dict:
        return dict(self.params)

    @property
    def domain_dict(self) -> dict:
        return dict(self.domain)

    def canonical(self) -> str:
        def block(items):
            return "{" + ",".join(f"{k}:{v!r}" for k, v in sorted(items)) + "}"
        return f"name={self.name}; params={block(self.params)}; domain={block(self.domain)}"


_BLOCK_RE = re.compile(r"^\{(.*)\}$", re.S)


def _parse_value(text: str):
    text = text.strip()
    if not text:
        raise SpecParseError("empty value in field specification")
    try:
        if re.fullmatch(r"[+-]?\d+", text):
            return int(text)
        return float(text)
    except ValueError:
        return text.strip("'\"")


def _parse_block(text: str) -> Tuple[Tuple[str, object], ...]:
    m = _BLOCK_RE.match(text.strip())
    if not m:
        raise SpecParseError(f"expected a {{k:v,...}} block, got {text!r}")
    body = m.group(1).strip()
    if not body:
        return ()
    items = []
    for part in body.split(","):
        if ":" not in part:
            raise SpecParseError(f"expected key:value, got {part!r}")
        key, value = part.split(":", 1)
        items.append((key.strip(), _parse_value(value)))
    return tuple(items)


def parse_field_spec(text: str) -> FieldSpec:
    """Parse ``name=<id>; params={k:v,...}; domain={k:v,...}``.

    Lines starting with '#' are ignored; ``params`` and ``domain`` are
    optional.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    text = " ".join(lines)
    entries = {}
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        if "=" not in chunk:
            raise SpecParseError(f"expected key=value, got {chunk.strip()!r}")
        key, value = chunk.split("=", 1)
        entries[key.strip()] = value.strip()
    unknown = set(entries) - {"name", "params", "domain"}
    if unknown:
        raise SpecParseError(f"unknown spec keys {sorted(unknown)}")
    if "name" not in entries or not entries["name"]:
        raise SpecParseError("field specification needs name=<catalog id>")
    return FieldSpec(name=entries["name"],
                     params=_parse_block(entries.get("params", "{}")),
                     domain=_parse_block(entries.get("domain", "{}")))
