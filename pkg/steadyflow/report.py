"""Report metadata, JSON serialization and CSV dumps.

JSON is written with sorted keys and floats rounded to 15 significant
digits, so two runs with the same inputs produce identical files once the
timestamp is switched off. Non-finite floats become ``null``.
"""
from dataclasses import dataclass, field as dc_field, fields, is_dataclass
from datetime import datetime, timezone
from pathlib import Path
import hashlib
import json
import logging
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from steadyflow.config import Tolerances
from steadyflow.fields import Domain, FieldSpec, GridField, parse_field_spec

logger = logging.getLogger(__name__)

TOOL_NAME = "steadyflow"
TOOL_VERSION = "1.0.0"
SCHEMA_VERSION = 1

_FLOAT_DIGITS = 15


def spec_hash(spec) -> str:
    """SHA-256 of the canonical field spec (text or ``FieldSpec``)."""
    if spec is None:
        return ""
    if isinstance(spec, str):
        spec = parse_field_spec(spec)
    text = spec.canonical() if isinstance(spec, FieldSpec) else str(spec)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ReportMeta:
    tool: str
    version: str
    schema: int
    spec: str
    spec_hash: str
    resolution: Optional[int]
    tolerances: Dict[str, Any] = dc_field(default_factory=dict)
    timestamp: Optional[str] = None

    @classmethod
    def build(cls, spec=None, resolution=None, tol: Optional[Tolerances] = None,
              timestamp: bool = True) -> "ReportMeta":
        tol = tol or Tolerances()
        canonical = ""
        if spec is not None:
            parsed = parse_field_spec(spec) if isinstance(spec, str) else spec
            canonical = parsed.canonical() if isinstance(parsed, FieldSpec) else str(parsed)
        stamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ") if timestamp else None
        return cls(TOOL_NAME, TOOL_VERSION, SCHEMA_VERSION, canonical, spec_hash(spec),
                   resolution, tol.as_dict(), stamp)


def _round(x: float):
    if not np.isfinite(x):
        return None
    return float(format(x, f".{_FLOAT_DIGITS}g"))


def to_jsonable(obj: Any, _depth: int = 0) -> Any:
    """Convert reports (dataclasses, numpy values, frames) to plain JSON values."""
    if _depth > 64:
        raise ValueError("report nesting too deep")
    d = _depth + 1
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    if isinstance(obj, complex):
        return {"real": _round(obj.real), "imag": _round(obj.imag)}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist(), d)
    if isinstance(obj, pd.DataFrame):
        return [to_jsonable(r, d) for r in obj.to_dict(orient="records")]
    if isinstance(obj, Domain):
        return to_jsonable(obj.describe(), d)
    if is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in fields(obj):
            if f.name.startswith("_") or f.name == "context" or not f.repr:
                continue
            out[f.name] = to_jsonable(getattr(obj, f.name), d)
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v, d) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [to_jsonable(v, d) for v in obj]
    if hasattr(obj, "is_Number") and getattr(obj, "is_Number"):
        # sympy numbers
        return _round(float(obj))
    return str(obj)


def write_json(report: Dict[str, Any], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def dumps(report: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(report), sort_keys=True, indent=2, allow_nan=False)


# ===== CSV dumps =====

def write_grid_csv(grid: GridField, path) -> Path:
    """Row-major grid dump with a ``# nx ny x0 y0 dx dy`` header; masked cells are nan."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ny, nx = grid.shape
    values = np.where(grid.mask, np.nan, grid.values)
    header = (f"# {nx} {ny} {float(grid.x_nodes[0])!r} {float(grid.y_nodes[0])!r} "
              f"{float(grid.dx)!r} {float(grid.dy)!r}\n")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header)
        pd.DataFrame(values).to_csv(fh, header=False, index=False, na_rep="nan",
                                    float_format="%.17g")
    logger.info("Wrote %dx%d grid to %s", nx, ny, path)
    return path


def read_grid_csv(path) -> Tuple[Dict[str, float], np.ndarray]:
    """Inverse of ``write_grid_csv``: header values and the (ny, nx) array."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing grid header")
    parts = first[1:].split()
    head = {"nx": int(parts[0]), "ny": int(parts[1]), "x0": float(parts[2]),
            "y0": float(parts[3]), "dx": float(parts[4]), "dy": float(parts[5])}
    values = pd.read_csv(path, skiprows=1, header=None, na_values=["nan"],
                         float_precision="round_trip").to_numpy(dtype=float)
    if values.shape != (head["ny"], head["nx"]):
        raise ValueError(f"{path}: header says {head['ny']}x{head['nx']}, data is {values.shape}")
    return head, values


def write_table_csv(table, path) -> Path:
    """Write a DataFrame (or list of row dicts) as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = table if isinstance(table, pd.DataFrame) else pd.DataFrame(list(table))
    frame.to_csv(path, index=False, float_format="%.17g", na_rep="nan")
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path
