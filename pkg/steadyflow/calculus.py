"""Differential operators, steady residuals and convergence probes.

Closed-form and series fields get exact operators (the result is again a
field with derivative access). Grid fields get node-based finite
differences: centered order-6 stencils in the interior, shifted six-node
stencils where the centered one would touch a masked node, and wrap-around
stencils on the periodic rectangle.
"""
from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from steadyflow.config import Tolerances
from steadyflow.errors import DomainError
from steadyflow.fields import (DerivativeField, GridField, ProductField, ScalarField,
                               SumField, SymbolicField, grid_nodes, sample_grid)
from steadyflow.stencils import centered_weights, shifted_weights

logger = logging.getLogger(__name__)

HALF_WIDTH = 3  # centered stencil half width (7 points)
SHIFTED_WIDTH = 6


@dataclass
class OperatorResult:
    """Operator output with the scheme that produced it.

    ``order`` is None for exact schemes.
    """
    field: Union[ScalarField, Tuple[ScalarField, ScalarField]]
    scheme: str
    order: Optional[int]


def _scheme_of(f: ScalarField):
    if isinstance(f, GridField):
        return "fd6", 6
    return "exact", None


# ===== Grid finite differences =====

def _axis_diff(values, deriv, h, axis, periodic):
    if deriv == 0:
        return values
    v = np.moveaxis(values, axis, -1)
    if periodic:
        w = centered_weights(deriv, HALF_WIDTH)
        out = np.zeros(v.shape)
        for k, wk in zip(range(-HALF_WIDTH, HALF_WIDTH + 1), w):
            out = out + wk * np.roll(v, -k, axis=-1)
    else:
        rows, n = v.shape
        valid = np.isfinite(v)
        pad = SHIFTED_WIDTH
        vp = np.pad(np.where(valid, v, 0.0), [(0, 0), (pad, pad)])
        okp = np.pad(valid, [(0, 0), (pad, pad)])
        counts = np.concatenate([np.zeros((rows, 1), dtype=int), np.cumsum(okp, axis=-1)], axis=-1)
        idx = np.arange(n) + pad
        candidates = [(-HALF_WIDTH, 2 * HALF_WIDTH + 1, centered_weights(deriv, HALF_WIDTH))]
        starts = sorted(range(1 - SHIFTED_WIDTH, 1), key=lambda s: abs(s + (SHIFTED_WIDTH - 1) / 2))
        candidates += [(s, SHIFTED_WIDTH, shifted_weights(deriv, s, SHIFTED_WIDTH)) for s in starts]
        out = np.full(v.shape, np.nan)
        for start, width, w in candidates:
            lo = idx + start
            usable = (counts[:, lo + width] - counts[:, lo]) == width
            todo = usable & np.isnan(out) & valid
            if not np.any(todo):
                continue
            acc = np.zeros(v.shape)
            for k in range(width):
                acc = acc + w[k] * vp[:, lo + k]
            out[todo] = acc[todo]
    out = out / h ** deriv
    return np.moveaxis(out, -1, axis)


def grid_derivative(grid: GridField, alpha) -> np.ndarray:
    """Node values of ∂^alpha by finite differences (NaN where no stencil fits)."""
    alpha = grid.check_order(alpha)
    vals = np.where(grid.mask, np.nan, grid.values)
    vals = _axis_diff(vals, alpha[0], grid.dx, 1, grid.periodic)
    return _axis_diff(vals, alpha[1], grid.dy, 0, grid.periodic)


def _grid_like(grid: GridField, values, name) -> GridField:
    return GridField(values, grid.x_nodes, grid.y_nodes, grid.domain, mask=grid.mask | ~np.isfinite(values),
                     name=name, max_order=max(grid.max_order - 2, 0), interp_order=grid.npts - 1)


def grid_laplacian(grid: GridField) -> GridField:
    lap = grid_derivative(grid, (2, 0)) + grid_derivative(grid, (0, 2))
    return _grid_like(grid, lap, f"lap({grid.name})")


def grid_bracket(f: GridField, g: GridField) -> GridField:
    if f.values.shape != g.values.shape:
        raise DomainError("grid bracket needs both fields on the same grid")
    fx, fy = grid_derivative(f, (1, 0)), grid_derivative(f, (0, 1))
    gx, gy = grid_derivative(g, (1, 0)), grid_derivative(g, (0, 1))
    return _grid_like(f, fx * gy - fy * gx, f"{{{f.name},{g.name}}}")


def interior_nodes(mask: np.ndarray, periodic: bool, band_stencils: int = 2) -> np.ndarray:
    """Unmasked nodes farther than ``band_stencils`` stencil half-widths from the mask."""
    if periodic:
        return ~mask
    band = band_stencils * HALF_WIDTH
    padded = np.pad(mask, 1, constant_values=True)
    grown = ndimage.binary_dilation(padded, structure=np.ones((3, 3), bool), iterations=band)
    return ~grown[1:-1, 1:-1]


# ===== Operators =====

def perp_gradient(f: ScalarField) -> OperatorResult:
    """Velocity (−∂₂f, ∂₁f)."""
    scheme, order = _scheme_of(f)
    u = SumField([(-1.0, DerivativeField(f, (0, 1)))], name=f"-dy({f.name})")
    v = DerivativeField(f, (1, 0))
    return OperatorResult((u, v), scheme, order)


def laplacian(f: ScalarField) -> OperatorResult:
    if isinstance(f, GridField):
        return OperatorResult(grid_laplacian(f), "fd6", 6)
    return OperatorResult(f.laplacian(), "exact", None)


def poisson_bracket(f: ScalarField, g: ScalarField) -> OperatorResult:
    """{f, g} = ∇⊥f·∇g = ∂₁f ∂₂g − ∂₂f ∂₁g."""
    if f.domain != g.domain:
        raise DomainError(f"bracket of fields on different domains: {f.domain.kind} vs {g.domain.kind}")
    if isinstance(f, GridField) and isinstance(g, GridField):
        return OperatorResult(grid_bracket(f, g), "fd6", 6)
    if isinstance(f, SymbolicField) and isinstance(g, SymbolicField):
        expr = f.expression((1, 0)) * g.expression((0, 1)) - f.expression((0, 1)) * g.expression((1, 0))
        return OperatorResult(SymbolicField(expr, f.domain, name=f"{{{f.name},{g.name}}}",
                                            max_order=min(f.max_order, g.max_order) - 1), "exact", None)
    bracket = SumField([
        (1.0, ProductField(DerivativeField(f, (1, 0)), DerivativeField(g, (0, 1)))),
        (-1.0, ProductField(DerivativeField(f, (0, 1)), DerivativeField(g, (1, 0)))),
    ], name=f"{{{f.name},{g.name}}}")
    scheme = "fd6" if isinstance(f, GridField) or isinstance(g, GridField) else "exact"
    return OperatorResult(bracket, scheme, 6 if scheme == "fd6" else None)


# ===== Residuals =====

@dataclass
class ResidualReport:
    field: str
    scheme: str
    resolution: Tuple[int, int]
    sup_residual: float
    l2_residual: float
    nodes: int
    excluded_nodes: int


def _norms(values, dx, dy):
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return float("nan"), float("nan")
    sup = float(np.max(np.abs(finite)))
    # fixed-order compensated sum so reruns agree bit for bit
    l2 = math.sqrt(math.fsum((finite * finite).tolist()) * dx * dy)
    return sup, l2


def residual_report(psi: ScalarField, resolution=256, tol: Optional[Tolerances] = None) -> ResidualReport:
    """Sup and L² norms of {ψ, Δψ} over interior nodes of the report grid."""
    tol = tol or Tolerances()
    if isinstance(psi, GridField):
        bracket = grid_bracket(psi, grid_laplacian(psi))
        keep = interior_nodes(psi.mask, psi.periodic, tol.boundary_band_stencils)
        values = np.where(keep, bracket.values, np.nan)
        sup, l2 = _norms(values, psi.dx, psi.dy)
        shape = psi.values.shape
        report = ResidualReport(psi.name, "fd6", (shape[1], shape[0]), sup, l2,
                                int(np.count_nonzero(np.isfinite(values))),
                                int(np.count_nonzero(~keep & ~psi.mask)))
    else:
        x, y = grid_nodes(psi.domain, resolution)
        XX, YY = np.meshgrid(x, y)
        mask = ~psi.domain.contains(XX, YY)
        keep = interior_nodes(mask, psi.domain.periodic, tol.boundary_band_stencils)
        bracket = poisson_bracket(psi, laplacian(psi).field).field
        values = np.full(XX.shape, np.nan)
        values[keep] = bracket(XX[keep], YY[keep])
        bad = int(np.count_nonzero(keep & ~np.isfinite(values)))
        if bad:
            logger.warning("%d non-finite bracket samples skipped for %s", bad, psi.name)
        dx = x[1] - x[0]
        dy = y[1] - y[0]
        sup, l2 = _norms(values, dx, dy)
        report = ResidualReport(psi.name, "exact", (x.size, y.size), sup, l2,
                                int(np.count_nonzero(np.isfinite(values))),
                                int(np.count_nonzero(~keep & ~mask)))
    logger.info("Steady residual of %s: sup=%.3e l2=%.3e", psi.name, report.sup_residual,
                report.l2_residual)
    return report


def steady_residual(psi: ScalarField, norm: str = "sup", resolution=256,
                    tol: Optional[Tolerances] = None) -> float:
    """‖{ψ, Δψ}‖ in the requested norm ('sup' or 'L2')."""
    if norm not in ("sup", "L2", "l2"):
        raise ValueError(f"norm must be 'sup' or 'L2', got {norm!r}")
    report = residual_report(psi, resolution, tol)
    return report.sup_residual if norm == "sup" else report.l2_residual


# ===== Convergence probe =====

@dataclass
class ConvergenceReport:
    operator: str
    field: str
    resolutions: List[int]
    spacings: List[float]
    errors: List[float]
    order: Optional[float]
    exact: bool


def _probe_errors(operator, field, n, tol):
    grid = sample_grid(field, n)
    keep = interior_nodes(grid.mask, grid.periodic, tol.boundary_band_stencils)
    XX, YY = grid.node_coordinates()
    if operator == "laplacian":
        approx = grid_laplacian(grid).values
        exact_field = field.laplacian()
    elif operator == "bracket":
        lap = field.laplacian()
        lap_grid = sample_grid(lap, n, max_order=2)
        approx = grid_bracket(grid, lap_grid).values
        exact_field = poisson_bracket(field, lap).field
    elif operator == "gradient":
        approx = grid_derivative(grid, (1, 0))
        exact_field = DerivativeField(field, (1, 0))
    else:
        raise ValueError(f"unknown operator {operator!r}; expected laplacian, bracket or gradient")
    use = keep & np.isfinite(approx)
    exact = exact_field(XX[use], YY[use])
    err = float(np.max(np.abs(approx[use] - exact)))
    scale = float(np.max(np.abs(exact))) if exact.size else 0.0
    return err, scale, grid.dx


def convergence_probe(operator: str, field: ScalarField, resolutions: Sequence[int],
                      tol: Optional[Tolerances] = None) -> ConvergenceReport:
    """Least-squares slope of log error against log h for a grid scheme.

    The reference is the field's exact operator; the grid scheme is applied
    to exact samples. When every error sits at rounding level the scheme is
    reported as exact and no order is fitted.
    """
    tol = tol or Tolerances()
    resolutions = [int(n) for n in resolutions]
    if len(resolutions) < 3:
        raise ValueError(f"convergence probe needs at least 3 resolutions, got {len(resolutions)}")
    errors, spacings, scales = [], [], []
    for n in resolutions:
        err, scale, h = _probe_errors(operator, field, n, tol)
        errors.append(err)
        spacings.append(h)
        scales.append(scale)
    floor = 1e-9 * max(1.0, max(scales))
    if all(e <= floor for e in errors):
        logger.info("%s on %s reproduced to rounding at all resolutions", operator, field.name)
        return ConvergenceReport(operator, field.name, resolutions, spacings, errors, None, True)
    slope = np.polyfit(np.log(spacings), np.log(np.maximum(errors, 1e-300)), 1)[0]
    logger.info("%s on %s: observed order %.2f", operator, field.name, slope)
    return ConvergenceReport(operator, field.name, resolutions, spacings, errors, float(slope), False)
