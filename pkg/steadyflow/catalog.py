"""Closed-form field catalog with attached ground truth.

Each entry bundles a builder, documented default parameters and ranges, and
ground truth (critical points with degrees, the flux function when one
exists, symmetry axes, boundary constant). Ground truth is asserted by the
tests, not enforced here.
"""
from dataclasses import dataclass, field as dc_field
from math import factorial
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy as sp
from scipy.special import jn_zeros

from steadyflow.errors import CatalogError
from steadyflow.fields import Domain, FieldSpec, SymbolicField, X, Y, parse_field_spec

logger = logging.getLogger(__name__)

S = sp.Symbol("s", real=True)
PI = sp.pi

# First zero of J0, shared by the eigenfunction entry and its tests
J01 = float(jn_zeros(0, 1)[0])

BESSEL_TERMS = 30


@dataclass
class FieldCatalogEntry:
    """One documented catalog entry.

    Attributes:
        name: Catalog identifier.
        builder: Callable ``(params, domain_params) -> SymbolicField``.
        defaults: Default parameter values.
        ranges: Per-parameter validator returning an error message or None.
        description: Closed form in words.
    """
    name: str
    builder: Callable
    defaults: Dict[str, object] = dc_field(default_factory=dict)
    ranges: Dict[str, Callable] = dc_field(default_factory=dict)
    description: str = ""


# ===== Helpers =====

def _int_at_least(lo):
    def check(v):
        if float(v) != int(v) or int(v) < lo:
            return f"must be an integer >= {lo}"
        return None
    return check


def _positive(v):
    return None if float(v) > 0 else "must be > 0"


def _open_unit(v):
    return None if 0 < float(v) < 1 else "must lie in (0, 1)"


def _center(params):
    return float(params.get("cx", 0.0)), float(params.get("cy", 0.0))


def _rho(cx, cy):
    return (X - cx) ** 2 + (Y - cy) ** 2


def _disk_domain(domain_params, default_radius, default_center=(0.0, 0.0)):
    kind = domain_params.get("kind", "disk")
    center = (float(domain_params.get("cx", default_center[0])),
              float(domain_params.get("cy", default_center[1])))
    if kind == "disk":
        return Domain.disk(center, float(domain_params.get("radius", default_radius)))
    if kind == "annulus":
        return Domain.annulus(center, float(domain_params.get("r_in", 0.5 * default_radius)),
                              float(domain_params.get("r_out", default_radius)))
    raise CatalogError(f"domain kind {kind!r} not supported for this entry")


def _torus_domain(domain_params):
    return Domain.periodic_rectangle(float(domain_params.get("lx", 2 * np.pi)),
                                     float(domain_params.get("ly", 2 * np.pi)),
                                     (float(domain_params.get("x0", 0.0)),
                                      float(domain_params.get("y0", 0.0))))


def _truth(critical_points=(), flux=None, axes=(), boundary_value=None, steady=True, **extra):
    truth = {
        "critical_points": [((float(p[0]), float(p[1])), d) for p, d in critical_points],
        "flux": flux,
        "symmetry_axes": list(axes),
        "boundary_value": boundary_value,
        "steady": steady,
    }
    truth.update(extra)
    return truth


def bump_profile(u):
    """exp(1 - 1/(1-u)) for u<1, else 0: a C-infinity bump with value 1 at u=0."""
    return sp.Piecewise((sp.exp(1 - 1 / (1 - u)), u < 1), (0, True))


# ===== Builders =====

def _sinsin(params, domain_params):
    expr = sp.sin(X) * sp.sin(Y)
    half = np.pi / 2
    points = [((i * np.pi, j * np.pi), 2) for i in range(2) for j in range(2)]
    points += [((half + i * np.pi, half + j * np.pi), 2) for i in range(2) for j in range(2)]
    meta = _truth(points, flux=-2 * S, axes=[("x", half), ("y", half)])
    return SymbolicField(expr, _torus_domain(domain_params), "sinsin", meta)


def _sin2sin2(params, domain_params):
    expr = sp.sin(X) ** 2 * sp.sin(Y) ** 2
    half = np.pi / 2
    points = [((i * np.pi, j * np.pi), 4) for i in range(2) for j in range(2)]
    points += [((half + i * np.pi, j * np.pi), 2) for i in range(2) for j in range(2)]
    points += [((i * np.pi, half + j * np.pi), 2) for i in range(2) for j in range(2)]
    points += [((half + i * np.pi, half + j * np.pi), 2) for i in range(2) for j in range(2)]
    meta = _truth(points, steady=False, critical_lines=[("x", 0.0), ("x", np.pi),
                                                        ("y", 0.0), ("y", np.pi)])
    return SymbolicField(expr, _torus_domain(domain_params), "sin2sin2", meta)


def _bump_of_f(params, domain_params):
    s0 = float(params["s0"])
    f = sp.sin(X) * sp.sin(Y)
    inside = (f > s0) & (X > 0) & (X < PI) & (Y > 0) & (Y < PI)
    expr = sp.Piecewise((sp.exp(1 - (1 - s0) / (f - s0)), inside), (0, True))
    # a function of sinsin: it commutes with sinsin but lap of it is not a function of it
    meta = _truth(steady=False, commutes_with="sinsin", s0=s0,
                  value_at_half=float(np.exp(1 - (1 - s0) / (0.5 - s0))))
    return SymbolicField(expr, _torus_domain(domain_params), "bump-of-f", meta)


def _radial_poly(params, domain_params):
    p = int(params["p"])
    cx, cy = _center(params)
    R = float(params["R"])
    expr = (1 - _rho(cx, cy) / R ** 2) ** p
    flux = (4 / sp.Float(R) ** 2) * (p * (p - 1) * S ** sp.Rational(p - 2, p)
                                     - p ** 2 * S ** sp.Rational(p - 1, p))
    meta = _truth([((cx, cy), 2)], flux=flux, axes=["all"], boundary_value=0.0,
                  center=(cx, cy), curve_degree=p, curve_radius=R)
    return SymbolicField(expr, _disk_domain(domain_params, R, (cx, cy)), f"radial-poly(p={p})", meta)


def _radial_even(params, domain_params):
    m = int(params["m"])
    cx, cy = _center(params)
    expr = 1 - _rho(cx, cy) ** m
    flux = -4 * m ** 2 * (1 - S) ** sp.Rational(m - 1, m)
    meta = _truth([((cx, cy), 2 * m)], flux=flux, axes=["all"], boundary_value=0.0,
                  center=(cx, cy))
    return SymbolicField(expr, _disk_domain(domain_params, 1.0, (cx, cy)), f"radial-even(m={m})", meta)


def _radial_quartic(params, domain_params):
    field = _radial_even({"m": 2, **params}, domain_params)
    field.name = "radial-quartic"
    return field


def _disk_eigen(params, domain_params):
    R = float(params["R"])
    cx, cy = _center(params)
    j = J01 / R
    z2 = _rho(cx, cy) * (j * j / 4)
    terms = [sp.Float((-1) ** k / factorial(k) ** 2, 30) * z2 ** k for k in range(BESSEL_TERMS)]
    expr = sp.Add(*terms)
    meta = _truth([((cx, cy), 2)], flux=-(j ** 2) * S, axes=["all"], boundary_value=0.0,
                  center=(cx, cy), eigenvalue=j ** 2)
    return SymbolicField(expr, _disk_domain(domain_params, R, (cx, cy)), "disk-eigen", meta)


def _shear(params, domain_params):
    meta = _truth(flux=-S, critical_lines=[("y", 0.0), ("y", np.pi)], line_degree=2)
    return SymbolicField(sp.cos(Y), _torus_domain(domain_params), "shear", meta)


def _two_bump(params, domain_params):
    c1 = (float(params["c1x"]), float(params["c1y"]))
    c2 = (float(params["c2x"]), float(params["c2y"]))
    r1, r2 = float(params["r1"]), float(params["r2"])
    a1, a2 = float(params["a1"]), float(params["a2"])
    if np.hypot(c1[0] - c2[0], c1[1] - c2[1]) <= r1 + r2:
        raise CatalogError("two-bump supports must be disjoint")
    expr = (a1 * bump_profile(_rho(*c1) / r1 ** 2)
            + a2 * bump_profile(_rho(*c2) / r2 ** 2))
    meta = _truth([(c1, 2), (c2, 2)], boundary_value=0.0, centers=[c1, c2],
                  radii=[r1, r2], amplitudes=[a1, a2])
    domain = _disk_domain(domain_params, 2.5)
    return SymbolicField(expr, domain, "two-bump", meta)


def _polynomial(params, domain_params):
    text = str(params.get("expr", ""))
    try:
        expr = sp.sympify(text, locals={"x": X, "y": Y})
        sp.Poly(expr, X, Y)
    except (sp.SympifyError, sp.PolynomialError, TypeError) as exc:
        raise CatalogError(f"polynomial entry needs a bivariate polynomial in x, y; got {text!r}") from exc
    if domain_params.get("kind") == "periodic-rectangle":
        raise CatalogError("polynomials are not periodic; use a disk or annulus domain")
    return SymbolicField(expr, _disk_domain(domain_params, 1.0), "polynomial", _truth(steady=None))


def _perturbed_radial(params, domain_params):
    p = int(params["p"])
    eps = float(params["eps"])
    expr = (1 - X ** 2 - Y ** 2) ** p + eps * X * Y
    return SymbolicField(expr, _disk_domain(domain_params, 1.0), "perturbed-radial",
                         _truth(steady=False, eps=eps))


def _counterexample(params, domain_params):
    # heavy; imported only when asked for
    from steadyflow.counterexample import build_counterexample_field
    return build_counterexample_field(
        curve=str(params["curve"]), a=float(params["a"]), b=float(params["b"]),
        delta=float(params["delta"]), nn=int(params["nn"]), ns=int(params["ns"]))


CATALOG: Dict[str, FieldCatalogEntry] = {
    "sinsin": FieldCatalogEntry("sinsin", _sinsin, description="sin(x) sin(y) on the 2pi torus"),
    "sin2sin2": FieldCatalogEntry("sin2sin2", _sin2sin2,
                                  description="sin(x)^2 sin(y)^2 on the 2pi torus"),
    "bump-of-f": FieldCatalogEntry("bump-of-f", _bump_of_f, {"s0": 0.2}, {"s0": _open_unit},
                                   "bump applied to sin(x)sin(y) in the cell (0,pi)^2 only"),
    "radial-poly": FieldCatalogEntry("radial-poly", _radial_poly,
                                     {"p": 2, "R": 1.0, "cx": 0.0, "cy": 0.0},
                                     {"p": _int_at_least(2), "R": _positive},
                                     "(1 - r^2/R^2)^p on the disk of radius R"),
    "radial-quartic": FieldCatalogEntry("radial-quartic", _radial_quartic, {"cx": 0.0, "cy": 0.0},
                                        description="1 - r^4 on the unit disk"),
    "radial-even": FieldCatalogEntry("radial-even", _radial_even, {"m": 3, "cx": 0.0, "cy": 0.0},
                                     {"m": _int_at_least(2)}, "1 - r^(2m) on the unit disk"),
    "disk-eigen": FieldCatalogEntry("disk-eigen", _disk_eigen, {"R": 1.0, "cx": 0.0, "cy": 0.0},
                                    {"R": _positive},
                                    "J0(j01 r/R) as a power series, Dirichlet eigenfunction"),
    "shear": FieldCatalogEntry("shear", _shear, description="cos(y) on the 2pi torus"),
    "two-bump": FieldCatalogEntry(
        "two-bump", _two_bump,
        {"c1x": -1.1, "c1y": 0.0, "c2x": 1.2, "c2y": 0.2, "r1": 1.0, "r2": 0.7,
         "a1": 1.0, "a2": 0.6},
        {"r1": _positive, "r2": _positive, "a1": _positive, "a2": _positive},
        "two compactly supported radial bumps with different centers"),
    "polynomial": FieldCatalogEntry("polynomial", _polynomial, {"expr": "x**2 + y**2"},
                                    description="user-supplied bivariate polynomial"),
    "perturbed-radial": FieldCatalogEntry("perturbed-radial", _perturbed_radial,
                                          {"p": 2, "eps": 0.1}, {"p": _int_at_least(1)},
                                          "(1 - r^2)^p + eps x y, a non-steady control"),
    "counterexample": FieldCatalogEntry(
        "counterexample", _counterexample,
        {"curve": "ellipse", "a": 1.3, "b": 0.8, "delta": 0.2, "nn": 16, "ns": 48},
        {"delta": _positive, "nn": _int_at_least(6), "ns": _int_at_least(1)},
        "series flow with vorticity 2 +/- psi^(5/2) around a Jordan curve"),
}


# ===== Operations =====

def catalog_names() -> List[str]:
    return sorted(CATALOG)


def catalog_field(name: str, params: Optional[dict] = None,
                  domain: Optional[dict] = None) -> SymbolicField:
    """Build a catalog field.

    Args:
        name: Catalog identifier.
        params: Parameter overrides; unknown keys are rejected.
        domain: Domain overrides (``kind``, ``radius``, ``cx`` ...).

    Raises:
        CatalogError: Unknown name, unknown parameter or out-of-range value.
    """
    entry = CATALOG.get(name)
    if entry is None:
        raise CatalogError(f"unknown catalog field {name!r}; known: {', '.join(catalog_names())}")
    params = dict(params or {})
    unknown = set(params) - set(entry.defaults)
    if unknown:
        raise CatalogError(f"{name}: unknown parameters {sorted(unknown)}")
    merged = {**entry.defaults, **params}
    for key, check in entry.ranges.items():
        msg = check(merged[key])
        if msg:
            raise CatalogError(f"{name}: parameter {key}={merged[key]!r} {msg}")
    field = entry.builder(merged, dict(domain or {}))
    field.metadata.setdefault("catalog", name)
    field.metadata["params"] = merged
    logger.debug("Built catalog field %s with %s", name, merged)
    return field


def field_from_spec(spec) -> SymbolicField:
    """Build a field from a ``FieldSpec`` or its text form."""
    if isinstance(spec, str):
        spec = parse_field_spec(spec)
    if not isinstance(spec, FieldSpec):
        raise TypeError(f"expected FieldSpec or str, got {type(spec).__name__}")
    return catalog_field(spec.name, spec.param_dict, spec.domain_dict)


def flux_callable(field) -> Optional[Callable]:
    """Numeric version of the recorded flux function, or None."""
    flux = field.metadata.get("flux")
    if flux is None:
        return None
    fn = sp.lambdify(S, flux, modules="numpy")

    def evaluate(s):
        s = np.asarray(s, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.broadcast_to(np.asarray(fn(s), dtype=float), s.shape).copy()
    return evaluate


def ground_truth_points(field) -> List[Tuple[Tuple[float, float], int]]:
    return list(field.metadata.get("critical_points", []))
