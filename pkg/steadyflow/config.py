"""Tolerances and persisted preferences for the workbench.

Defaults live in ``DEFAULT_TOLERANCES``. A small JSON file can override any
of them; its directory can be redirected with the environment variable
`STEADYFLOW_CONFIG_DIR` for testing or portability.
"""
from dataclasses import dataclass, fields, replace
from pathlib import Path
import json
import logging
import os

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = {
    # field_core
    "catalog_max_order": 8,
    "grid_max_order": 4,
    "interp_order": 6,
    # calculus
    "steady_threshold": 1e-6,
    "boundary_band_stencils": 2,
    # critical_set
    "tol_deg": 1e-7,
    "critical_band": 1.5,
    "tol_rad": 1e-6,
    # flux_relation
    "tol_branch_floor": 1e-8,
    "tol_fit": 1e-6,
    "endpoint_window": 0.1,
    "critical_level_gap": 1e-3,
    "flux_levels": 256,
    "flux_residual_threshold": 1e-5,
    # elliptic_solver
    "radial_rtol": 1e-12,
    "newton_tol": 1e-9,
    "c_max": 1e6,
    # moving_plane
    "tol_mp": 1e-9,
    "eps_div": 1e-10,
    "tol_ang": 1e-3,
    "tol_center": 1e-6,
    "tol_sym": 1e-7,
    "sweep_lambdas": 256,
    "directions": 16,
    # counterexample
    "chart_margin": 0.5,
}

_CONFIG_FILENAME = "config.json"


@dataclass(frozen=True)
class Tolerances:
    catalog_max_order: int = DEFAULT_TOLERANCES["catalog_max_order"]
    grid_max_order: int = DEFAULT_TOLERANCES["grid_max_order"]
    interp_order: int = DEFAULT_TOLERANCES["interp_order"]
    steady_threshold: float = DEFAULT_TOLERANCES["steady_threshold"]
    boundary_band_stencils: int = DEFAULT_TOLERANCES["boundary_band_stencils"]
    tol_deg: float = DEFAULT_TOLERANCES["tol_deg"]
    critical_band: float = DEFAULT_TOLERANCES["critical_band"]
    tol_rad: float = DEFAULT_TOLERANCES["tol_rad"]
    tol_branch_floor: float = DEFAULT_TOLERANCES["tol_branch_floor"]
    tol_fit: float = DEFAULT_TOLERANCES["tol_fit"]
    endpoint_window: float = DEFAULT_TOLERANCES["endpoint_window"]
    critical_level_gap: float = DEFAULT_TOLERANCES["critical_level_gap"]
    flux_levels: int = DEFAULT_TOLERANCES["flux_levels"]
    flux_residual_threshold: float = DEFAULT_TOLERANCES["flux_residual_threshold"]
    radial_rtol: float = DEFAULT_TOLERANCES["radial_rtol"]
    newton_tol: float = DEFAULT_TOLERANCES["newton_tol"]
    c_max: float = DEFAULT_TOLERANCES["c_max"]
    tol_mp: float = DEFAULT_TOLERANCES["tol_mp"]
    eps_div: float = DEFAULT_TOLERANCES["eps_div"]
    tol_ang: float = DEFAULT_TOLERANCES["tol_ang"]
    tol_center: float = DEFAULT_TOLERANCES["tol_center"]
    tol_sym: float = DEFAULT_TOLERANCES["tol_sym"]
    sweep_lambdas: int = DEFAULT_TOLERANCES["sweep_lambdas"]
    directions: int = DEFAULT_TOLERANCES["directions"]
    chart_margin: float = DEFAULT_TOLERANCES["chart_margin"]

    def with_overrides(self, overrides: dict) -> "Tolerances":
        """Return a copy with known keys replaced; unknown keys are logged and ignored."""
        known = {f.name: f.type for f in fields(self)}
        clean = {}
        for key, value in (overrides or {}).items():
            key = key.replace('-', '_')
            if key not in known:
                logger.warning("Ignoring unknown tolerance %r", key)
                continue
            default = getattr(self, key)
            clean[key] = type(default)(value)
        return replace(self, **clean)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def get_config_dir() -> Path:
    env = os.environ.get('STEADYFLOW_CONFIG_DIR')
    if env:
        return Path(env)
    if os.name == 'nt':
        appdata = os.environ.get('APPDATA') or Path.home()
        return Path(appdata) / 'steadyflow'
    else:
        return Path.home() / '.config' / 'steadyflow'


def get_config_path() -> Path:
    return get_config_dir() / _CONFIG_FILENAME


def load_prefs() -> dict:
    path = get_config_path()
    if not path.exists():
        return dict(DEFAULT_TOLERANCES)
    try:
        data = json.loads(path.read_text(encoding="utf-8")) or {}
    except (OSError, ValueError) as exc:
        logger.warning("Unreadable preferences at %s (%s); using defaults", path, exc)
        return dict(DEFAULT_TOLERANCES)
    if not isinstance(data, dict):
        logger.warning("Preferences at %s are not a JSON object; using defaults", path)
        return dict(DEFAULT_TOLERANCES)
    return {**DEFAULT_TOLERANCES, **data}


def save_prefs(prefs: dict) -> None:
    """Persist tolerance overrides; keys outside the tolerance set are dropped."""
    path = get_config_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    known = {k: v for k, v in prefs.items() if k in DEFAULT_TOLERANCES}
    path.write_text(json.dumps(known, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_tolerances(overrides: dict = None) -> Tolerances:
    """Defaults, then the preferences file, then per-run overrides."""
    prefs = load_prefs()
    tol = Tolerances().with_overrides(
        {k: v for k, v in prefs.items() if k in DEFAULT_TOLERANCES})
    if overrides:
        tol = tol.with_overrides(overrides)
    return tol
