"""Command-line surface: argument parsing, subcommand runners and exit codes.

Every subcommand builds a JSON report that embeds ``ReportMeta`` (tool,
version, schema, spec hash, resolution, tolerances). Exit codes: 0 success,
1 usage or any workbench error, 2 non-steady input, 3 inconclusive.
"""
import argparse
from pathlib import Path
import logging
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import sympy as sp
from scipy.interpolate import CubicSpline

from steadyflow import calculus, critical_set, elliptic_solver, flux_relation, moving_plane
from steadyflow.catalog import S, catalog_field, field_from_spec, flux_callable
from steadyflow.config import Tolerances, load_tolerances
from steadyflow.errors import (DecompositionError, FluxError, ResolutionError, SweepError,
                               UsageError, WorkbenchError)
from steadyflow.fields import (Domain, FieldSpec, GridField, ScalarField, grid_nodes,
                               parse_field_spec, sample_grid)
from steadyflow.interpretation import AnalysisClassifier
from steadyflow.regions import Region
from steadyflow.report import ReportMeta, write_grid_csv, write_json, write_table_csv

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("bracket", "residual", "critical-set", "flux", "solve", "moving-plane",
               "counterexample", "analyze")
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NON_STEADY = 2
EXIT_INCONCLUSIVE = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit code 1."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage()}")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--field", type=str, default=None,
                        help="catalog id, or a full spec 'name=...; params={...}; domain={...}'")
    common.add_argument("--spec", type=str, default=None, help="field specification file")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="field parameter override (repeatable)")
    common.add_argument("--resolution", type=int, default=256)
    common.add_argument("--results-path", type=str, default="results")
    common.add_argument("--output", type=str, default=None, help="JSON report path")
    common.add_argument("--tolerance", action="append", default=[], metavar="KEY=VALUE",
                        help="override one tolerance for this run (repeatable)")
    common.add_argument("--no-timestamp", action="store_true", default=False,
                        help="leave the timestamp out so reruns are byte-identical")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="workbench", fromfile_prefix_chars='@', allow_abbrev=False,
                     description="Steady 2D Euler flow workbench")
    parser.add_argument("--log-level", type=str, default="INFO")
    parser.add_argument("--log-file", type=str, default=None)
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    common = _common_flags()

    p = sub.add_parser("bracket", parents=[common], allow_abbrev=False,
                       help="Poisson bracket {f, g} norms")
    p.add_argument("--g", type=str, default=None, help="second field (default: lap f)")
    p.add_argument("--scheme", choices=("exact", "fd6"), default="exact")

    p = sub.add_parser("residual", parents=[common], allow_abbrev=False,
                       help="steady residual {psi, lap psi}")
    p.add_argument("--scheme", choices=("exact", "fd6"), default="exact")
    p.add_argument("--convergence", type=str, default=None, metavar="N1,N2,N3",
                   help="also probe the grid operators at these resolutions")

    p = sub.add_parser("critical-set", parents=[common], allow_abbrev=False,
                       help="critical set, degrees and region decomposition")
    p.add_argument("--radiality", action="store_true", default=False)

    p = sub.add_parser("flux", parents=[common], allow_abbrev=False,
                       help="flux relation and endpoint expansions")
    p.add_argument("--levels", type=int, default=None)
    p.add_argument("--endpoint-window", type=float, default=None)
    p.add_argument("--k0-max", type=int, default=4)
    p.add_argument("--table", type=str, default=None, help="CSV of per-component samples")

    p = sub.add_parser("solve", parents=[common], allow_abbrev=False,
                       help="solve lap psi = F(psi) on a disk")
    p.add_argument("--flux", type=str, default=None, help="F as an expression in s")
    p.add_argument("--flux-table", type=str, default=None, help="CSV with columns s,F")
    p.add_argument("--flux-field", type=str, default=None, help="catalog field whose F to use")
    p.add_argument("--support", type=str, default=None, metavar="LO,HI")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--boundary-value", type=float, default=0.0)
    p.add_argument("--mode", choices=elliptic_solver.SOLVE_MODES, default="disk-newton")
    p.add_argument("--psi0", type=float, default=None, help="center value for radial-shoot")
    p.add_argument("--guess", type=str, default=None, help="initial guess field (catalog id or spec)")
    p.add_argument("--nr", type=int, default=20)
    p.add_argument("--ntheta", type=int, default=40)
    p.add_argument("--normalize", action="store_true", default=False)
    p.add_argument("--check", action="store_true", default=False,
                   help="run the boundary and distance-bound checks on the solution")

    p = sub.add_parser("moving-plane", parents=[common], allow_abbrev=False,
                       help="moving-plane symmetry sweep")
    p.add_argument("--directions", type=int, default=None)
    p.add_argument("--region", type=str, default="auto", help="'auto' or a CSV polyline x,y")
    p.add_argument("--lambdas", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--audit", action="store_true", default=False,
                   help="audit the reflection coefficient with the recorded F")

    p = sub.add_parser("counterexample", parents=[common], allow_abbrev=False,
                       help="series stream function on a tube around a Jordan curve")
    p.add_argument("--curve", type=str, default="ellipse", help="circle, ellipse or a Fourier CSV")
    p.add_argument("--a", type=float, default=1.3)
    p.add_argument("--b", type=float, default=0.8)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--orders", type=str, default="16,48", metavar="NN,NS")

    p = sub.add_parser("analyze", parents=[common], allow_abbrev=False,
                       help="full pipeline and final classification")
    p.add_argument("--directions", type=int, default=None)
    p.add_argument("--sweep-resolution", type=int, default=96)
    return parser


def _key_values(items: List[str], what: str) -> Dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"{what} expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _extra_params(extra: List[str]) -> Dict[str, str]:
    """Unrecognized ``--name value`` pairs become field parameters."""
    out = {}
    i = 0
    while i < len(extra):
        token = extra[i]
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        if "=" in token:
            key, value = token[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for {token}")
            key, value = token[2:], extra[i + 1]
            i += 2
        out[key] = value
    return out


def config(args=None):
    """Parse command-line arguments (``sys.argv`` when ``args`` is None)."""
    parser = build_parser()
    parsed, extra = parser.parse_known_args(args)
    if parsed.command is None:
        raise UsageError(parser.format_usage())
    parsed.params = {**_key_values(parsed.param, "--param"), **_extra_params(extra)}
    overrides = _key_values(parsed.tolerance, "--tolerance")
    if getattr(parsed, "endpoint_window", None) is not None:
        overrides["endpoint_window"] = parsed.endpoint_window
    parsed.tolerances = load_tolerances(overrides)
    return parsed


# ===== Field resolution =====

def resolve_spec(field: Optional[str] = None, spec_file: Optional[str] = None,
                 params: Optional[Dict[str, str]] = None) -> FieldSpec:
    if spec_file:
        try:
            text = Path(spec_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read spec file {spec_file}: {exc}") from exc
        spec = parse_field_spec(text)
    elif field:
        spec = parse_field_spec(field if "=" in field else f"name={field}")
    else:
        raise UsageError("a field is required: pass --field or --spec")
    if params:
        # parse the overrides with the spec grammar so values get the same types
        text = "name=x; params={" + ",".join(f"{k}:{v}" for k, v in params.items()) + "}"
        merged = {**spec.param_dict, **parse_field_spec(text).param_dict}
        spec = FieldSpec(spec.name, tuple(sorted(merged.items())), spec.domain)
    return spec


def _bracket_norms(f: ScalarField, g: ScalarField, resolution: int, scheme: str,
                   tol: Tolerances) -> Dict[str, Any]:
    x, y = grid_nodes(f.domain, resolution)
    XX, YY = np.meshgrid(x, y)
    mask = ~f.domain.contains(XX, YY)
    keep = calculus.interior_nodes(mask, f.domain.periodic, tol.boundary_band_stencils)
    if scheme == "fd6":
        values = calculus.grid_bracket(sample_grid(f, resolution), sample_grid(g, resolution)).values
        values = np.where(keep, values, np.nan)
    else:
        bracket = calculus.poisson_bracket(f, g).field
        values = np.full(XX.shape, np.nan)
        values[keep] = bracket(XX[keep], YY[keep])
    sup, l2 = calculus._norms(values, x[1] - x[0], y[1] - y[0])
    return {"field": f.name, "g": g.name, "scheme": scheme, "resolution": [x.size, y.size],
            "sup_residual": sup, "l2_residual": l2}


# ===== Subcommand runners =====

def run_bracket(psi: ScalarField, args, tol: Tolerances) -> Tuple[Dict[str, Any], int]:
    if args.g:
        g = field_from_spec(resolve_spec(args.g))
        return _bracket_norms(psi, g, args.resolution, args.scheme, tol), EXIT_OK
    return run_residual(psi, args, tol)


def run_residual(psi: ScalarField, args, tol: Tolerances) -> Tuple[Dict[str, Any], int]:
    if getattr(args, "scheme", "exact") == "fd6":
        report = calculus.residual_report(sample_grid(psi, args.resolution), args.resolution, tol)
    else:
        report = calculus.residual_report(psi, args.resolution, tol)
    out: Dict[str, Any] = {"field": report.field, "scheme": report.scheme,
                           "resolution": list(report.resolution),
                           "sup_residual": report.sup_residual, "l2_residual": report.l2_residual,
                           "nodes": report.nodes, "excluded_nodes": report.excluded_nodes,
                           "steady": report.sup_residual <= tol.steady_threshold}
    if getattr(args, "convergence", None):
        sizes = [int(n) for n in args.convergence.split(",")]
        out["convergence"] = [calculus.convergence_probe(op, psi, sizes, tol)
                              for op in ("laplacian", "bracket")]
    code = EXIT_OK if out["steady"] or args.command == "bracket" else EXIT_NON_STEADY
    return out, code


def _critical_levels(psi: ScalarField, components) -> List[float]:
    levels = []
    for comp in components:
        if comp.kind == "plateau" or not len(comp.points):
            continue
        vals = psi(comp.points[:, 0], comp.points[:, 1])
        vals = vals[np.isfinite(vals)]
        if len(vals):
            levels.append(float(np.median(vals)))
    return sorted(set(levels))


def _critical_summary(psi: ScalarField, resolution: int, tol: Tolerances,
                      radiality: bool = False) -> Dict[str, Any]:
    components = critical_set.find_critical_set(psi, min(resolution, 256), tol)
    out: Dict[str, Any] = {
        "components": [{"kind": c.kind, "degree": c.degree, "degrees": c.degrees,
                        "constant_degree": c.constant_degree, "anomalous": c.anomalous,
                        "branch": c.branch, "points": c.points} for c in components],
        "walls": sum(1 for c in components if c.is_curve and c.degree is not None
                     and c.degree % 2 == 0),
        "levels": _critical_levels(psi, components),
    }
    if psi.domain.kind == "jordan-tube":
        return out
    try:
        dec = critical_set.innermost_loop(components, psi.domain, resolution)
    except DecompositionError as exc:
        out["decomposition_error"] = str(exc)
        return out
    out["cells"] = len(dec.cells)
    out["decomposition"] = {"cells": dec.cells, "adjacency": dec.adjacency,
                            "innermost": dec.innermost,
                            "no_critical_curves": dec.no_critical_curves}
    if radiality:
        out["radiality"] = critical_set.detect_local_radiality(psi, dec, tol)
    return out


def run_critical_set(psi: ScalarField, args, tol: Tolerances) -> Tuple[Dict[str, Any], int]:
    return _critical_summary(psi, args.resolution, tol, args.radiality), EXIT_OK


def _fit_or_error(flux, endpoint, k0_max, tol):
    try:
        return flux_relation.fit_puiseux(flux, endpoint, k0_max=k0_max, tol=tol)
    except FluxError as exc:
        return {"endpoint": endpoint, "error": str(exc)}


def _flux_summary(psi: ScalarField, resolution: int, tol: Tolerances, levels=None,
                  k0_max: int = 4, critical_levels=(), table: Optional[str] = None) -> Dict[str, Any]:
    residual = calculus.residual_report(psi, resolution, tol).sup_residual
    samples = flux_relation.collect_pairs(psi, levels or tol.flux_levels, resolution,
                                          critical_levels=critical_levels, tol=tol)
    if table:
        write_table_csv([{"level": s.level, "component": s.component, "mean": s.mean,
                          "spread": s.spread, "points": len(s.points)} for s in samples], table)
    flux = flux_relation.extract_flux(samples, residual, tol=tol)
    out: Dict[str, Any] = {
        "range": [flux.a, flux.b], "verdict": flux.verdict, "tol_branch": flux.tol_branch,
        "max_level_spread": flux.max_level_spread,
        "max_component_spread": flux.max_component_spread,
        "branch_table": flux.branch_table, "affine": flux.affine, "skipped_levels": samples.skipped,
        "steady_residual": residual,
    }
    out["residual"] = flux_relation.verify_flux_residual(psi, flux, resolution, tol)
    if flux.single_valued:
        out["puiseux"] = [_fit_or_error(flux, e, k0_max, tol) for e in ("a", "b")]
    else:
        branches = []
        try:
            for rel in flux_relation.branch_relations(samples, tol=tol):
                branches.append({"level_span": rel.metadata.get("level_span"),
                                 "verdict": rel.verdict,
                                 "puiseux": [_fit_or_error(rel, e, k0_max, tol) for e in ("a", "b")]})
        except FluxError as exc:
            out["branch_error"] = str(exc)
        out["branches"] = branches
    out["relation"] = flux
    return out


def run_flux(psi: ScalarField, args, tol: Tolerances) -> Tuple[Dict[str, Any], int]:
    levels = _critical_summary_levels(psi, args.resolution, tol)
    out = _flux_summary(psi, args.resolution, tol, args.levels, args.k0_max, levels, args.table)
    out.pop("relation")
    return out, EXIT_OK


def _critical_summary_levels(psi, resolution, tol) -> List[float]:
    try:
        comps = critical_set.find_critical_set(psi, min(resolution, 128), tol)
    except (ResolutionError, DecompositionError) as exc:
        logger.warning("Critical levels unavailable: %s", exc)
        return []
    return _critical_levels(psi, comps)


def _solve_flux(args) -> Tuple[Any, Optional[Tuple[float, float]]]:
    try:
        support = tuple(float(v) for v in args.support.split(",")) if args.support else None
    except ValueError as exc:
        raise UsageError(f"--support must be two numbers LO,HI; got {args.support!r}") from exc
    if support is not None and (len(support) != 2 or not support[0] < support[1]):
        raise UsageError(f"--support must be two increasing numbers LO,HI; got {args.support!r}")
    if args.flux:
        try:
            expr = sp.sympify(args.flux, locals={"s": S})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise UsageError(f"--flux is not an expression in s: {args.flux!r}") from exc
        if not isinstance(expr, sp.Expr) or expr.free_symbols - {S}:
            raise UsageError(f"--flux may only use the symbol s: {args.flux!r}")
        fn = sp.lambdify(S, expr, modules="numpy")

        def flux(s):
            s = np.asarray(s, dtype=float)
            return np.broadcast_to(np.asarray(fn(s), dtype=float), s.shape).copy()
        return flux, support
    if args.flux_table:
        try:
            table = pd.read_csv(args.flux_table)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read flux table {args.flux_table}: {exc}") from exc
        if not {"s", "F"} <= set(table.columns):
            raise UsageError(f"{args.flux_table} needs columns s,F")
        table = table.sort_values("s")
        spline = CubicSpline(table["s"].to_numpy(float), table["F"].to_numpy(float))
        return spline, support or (float(table["s"].iloc[0]), float(table["s"].iloc[-1]))
    if args.flux_field:
        fn = flux_callable(catalog_field(args.flux_field))
        if fn is None:
            raise UsageError(f"catalog field {args.flux_field!r} has no recorded F")
        return fn, support
    raise UsageError("solve needs --flux, --flux-table or --flux-field")


def run_solve(args, tol: Tolerances, results: Path) -> Tuple[Dict[str, Any], int]:
    flux, support = _solve_flux(args)
    domain = Domain.disk(radius=args.radius)
    problem = elliptic_solver.SemilinearProblem(domain, flux, args.boundary_value, args.mode,
                                                support=support)
    if args.normalize:
        problem = problem.normalized()
    out: Dict[str, Any] = {"mode": args.mode, "domain": domain, "boundary_value": args.boundary_value,
                           "scale": problem.scale}
    grid_path = results / "solve_grid.csv"
    if args.mode == "radial-shoot":
        if args.psi0 is None:
            raise UsageError("radial-shoot needs --psi0")
        profile = elliptic_solver.solve_radial(problem, args.psi0, tol=tol)
        out["boundary"] = profile.boundary
        x, y = grid_nodes(domain, args.resolution)
        XX, YY = np.meshgrid(x, y)
        r = np.hypot(XX, YY)
        mask = r > args.radius
        values = np.full(r.shape, np.nan)
        values[~mask] = problem.scale * profile(r[~mask])
        write_grid_csv(GridField(values, x, y, domain, mask=mask, name="radial-solution"), grid_path)
    else:
        guess = field_from_spec(resolve_spec(args.guess)) if args.guess else None
        solution = elliptic_solver.solve_disk_newton(problem, guess, args.nr, args.ntheta, tol=tol)
        out["solver"] = dict(solution.metadata)
        write_grid_csv(solution.to_grid(args.resolution), grid_path)
        if args.check:
            region = Region.from_domain(domain)
            over = elliptic_solver.overdetermined_check(solution, region, problem.F)
            out["overdetermined"] = {k: v for k, v in vars(over).items() if k != "table"}
            try:
                out["distance_bound"] = elliptic_solver.distance_bound_check(solution, region, tol=tol)
            except WorkbenchError as exc:
                out["distance_bound"] = {"error": str(exc)}
    out["grid_csv"] = str(grid_path)
    return out, EXIT_OK


def _sweep_region(psi: ScalarField, spec: str) -> Region:
    if spec == "auto":
        return moving_plane.resolve_region(psi)
    pts = pd.read_csv(spec).to_numpy(float)[:, :2]
    return Region.from_polyline(pts, name=Path(spec).stem)


def _plane_summary(report: moving_plane.MovingPlaneReport) -> Dict[str, Any]:
    v = report.verdict
    return {"verdict": v.kind, "center": v.center, "center_error": v.center_error,
            "axes": v.axes, "symmetric_directions": v.symmetric_directions,
            "audit": report.audit, "directions": report.table(), "metadata": report.metadata}


def run_moving_plane(psi: ScalarField, args, tol: Tolerances) -> Tuple[Dict[str, Any], int]:
    region = _sweep_region(psi, args.region)
    flux = flux_callable(psi) if args.audit else None
    if args.audit and flux is None:
        logger.warning("Field %s has no recorded F; skipping the coefficient audit", psi.name)
    report = moving_plane.run_moving_plane(psi, region, args.directions, args.lambdas,
                                           min(args.resolution, 128), flux, args.workers, tol)
    return _plane_summary(report), EXIT_OK


def run_counterexample(args, tol: Tolerances, results: Path) -> Tuple[Dict[str, Any], int]:
    from steadyflow import counterexample
    try:
        nn, ns = (int(v) for v in args.orders.split(","))
    except ValueError as exc:
        raise UsageError(f"--orders expects NN,NS, got {args.orders!r}") from exc
    field = counterexample.build_counterexample_field(args.curve, args.a, args.b, args.delta,
                                                      nn, ns, tol)
    solution = field.solution
    grid_path = results / "counterexample_grid.csv"
    coef_path = results / "counterexample_coefficients.csv"
    write_grid_csv(sample_grid(field, args.resolution), grid_path)
    write_table_csv(solution.coefficient_table(), coef_path)
    out = {"curve": solution.chart.curve.describe(), "delta": args.delta, "orders": [nn, ns],
           "residual": solution.residual, "decay": list(solution.decay),
           "grid_csv": str(grid_path), "coefficients_csv": str(coef_path)}
    return out, EXIT_OK


def run_analyze(spec: FieldSpec, resolution: int = 256, output=None, tol: Optional[Tolerances] = None,
                directions: Optional[int] = None, sweep_resolution: int = 96,
                timestamp: bool = True) -> Tuple[Dict[str, Any], int]:
    """Residual, critical set, flux relation and moving plane, then the final label.

    Returns:
        The report and its exit code (0, 2 non-steady, 3 inconclusive).
    """
    tol = tol or Tolerances()
    psi = field_from_spec(spec)
    report: Dict[str, Any] = {"meta": ReportMeta.build(spec, resolution, tol, timestamp),
                              "field": spec.canonical()}
    res = calculus.residual_report(psi, resolution, tol)
    report["residual"] = {"sup": res.sup_residual, "l2": res.l2_residual, "scheme": res.scheme}
    classifier = AnalysisClassifier(tol)
    if res.sup_residual > tol.steady_threshold:
        result = classifier.classify(report["residual"])
        report.update(result)
        if output:
            write_json(report, output)
        return report, result["exit_code"]

    critical = None
    try:
        critical = _critical_summary(psi, min(resolution, 256), tol)
        report["critical_set"] = critical
    except (ResolutionError, DecompositionError) as exc:
        logger.warning("Critical-set stage failed: %s", exc)
        report["critical_set"] = {"error": str(exc)}

    flux = None
    try:
        flux = _flux_summary(psi, resolution, tol,
                             critical_levels=(critical or {}).get("levels", ()))
        flux.pop("relation")
        report["flux"] = flux
    except FluxError as exc:
        logger.warning("Flux stage failed: %s", exc)
        report["flux"] = {"error": str(exc)}

    plane = None
    if not psi.domain.periodic:
        try:
            mp = moving_plane.run_moving_plane(psi, None, directions, None, sweep_resolution,
                                               tol=tol)
            plane = _plane_summary(mp)
            report["moving_plane"] = plane
        except SweepError as exc:
            logger.warning("Moving-plane stage failed: %s", exc)
            report["moving_plane"] = {"error": str(exc)}

    result = classifier.classify(report["residual"], flux, plane, critical)
    report.update(result)
    if output:
        write_json(report, output)
    return report, result["exit_code"]


class Controller:
    """Runs one parsed command line and writes its report."""

    def __init__(self, args=None):
        self.config = config(args)
        self.tol = self.config.tolerances
        self.results = Path(self.config.results_path)
        self.results.mkdir(parents=True, exist_ok=True)

    @property
    def output_path(self) -> Path:
        if self.config.output:
            return Path(self.config.output)
        return self.results / f"{self.config.command}.json"

    def spec(self) -> Optional[FieldSpec]:
        cfg = self.config
        if cfg.command in ("solve", "counterexample"):
            return None
        return resolve_spec(cfg.field, cfg.spec, cfg.params)

    def run(self) -> Tuple[Dict[str, Any], int]:
        cfg = self.config
        spec = self.spec()
        if cfg.command == "analyze":
            return run_analyze(spec, cfg.resolution, self.output_path, self.tol, cfg.directions,
                               cfg.sweep_resolution, not cfg.no_timestamp)
        report, code = run_subcommand(cfg.command, cfg, spec, self.tol, self.results)
        report = {"meta": ReportMeta.build(spec, cfg.resolution, self.tol, not cfg.no_timestamp),
                  **report}
        write_json(report, self.output_path)
        return report, code


def run_subcommand(name: str, args, spec: Optional[FieldSpec] = None,
                   tol: Optional[Tolerances] = None, results=None) -> Tuple[Dict[str, Any], int]:
    """Dispatch one subcommand; the report has no meta block yet."""
    tol = tol or Tolerances()
    results = Path(results or getattr(args, "results_path", "results"))
    if name not in SUBCOMMANDS:
        raise UsageError(f"unknown subcommand {name!r}; expected one of {', '.join(SUBCOMMANDS)}")
    if name == "solve":
        return run_solve(args, tol, results)
    if name == "counterexample":
        return run_counterexample(args, tol, results)
    psi = field_from_spec(spec)
    runner = {"bracket": run_bracket, "residual": run_residual, "critical-set": run_critical_set,
              "flux": run_flux, "moving-plane": run_moving_plane}[name]
    return runner(psi, args, tol)


def main(argv=None) -> int:
    """Entry point; returns the exit code."""
    try:
        controller = Controller(argv)
    except UsageError as exc:
        print(str(exc).strip())
        return EXIT_ERROR
    try:
        report, code = controller.run()
    except WorkbenchError as exc:
        logger.error("%s failed: %s", controller.config.command, exc)
        return EXIT_ERROR
    summary = report.get("summary") or report.get("verdict") or "done"
    print(f"{controller.config.command}: {summary} -> {controller.output_path}")
    return code
