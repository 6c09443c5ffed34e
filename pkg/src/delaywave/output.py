"""CSV and JSON emitters with byte-reproducible formatting.

Numbers are written with the shortest decimal that round-trips to the same
double (``repr`` of a Python float).  CSV files use ``#`` comment headers and
LF line endings.
"""
from __future__ import annotations

import json
import math
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import EnergySample, Grid1D

CSV_FIELDS = EnergySample.CSV_FIELDS

ENV_OUT = "DELAYWAVE_OUT"
DEFAULT_OUT = "delaywave_out"


def default_out_dir() -> Path:
    return Path(os.environ.get(ENV_OUT, DEFAULT_OUT))


def fmt(x) -> str:
    """Shortest round-trip representation of a number."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, columns: Sequence[str], rows: Iterable[Sequence], comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path) -> tuple[list, np.ndarray]:
    """Read a numeric CSV written by :func:`write_csv` (comments skipped)."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(-1, len(header))


def write_energy_csv(path, samples: Sequence[EnergySample], comments: Sequence[str] = ()) -> Path:
    rows = ([getattr(s, f) for f in CSV_FIELDS] for s in samples)
    return write_csv(path, CSV_FIELDS, rows, comments)


def write_snapshot_csv(path, t: float, u: np.ndarray, v: np.ndarray, grid) -> Path:
    comments = [f"t={fmt(t)}"]
    if isinstance(grid, Grid1D):
        return write_csv(path, ("x", "u", "v"), zip(grid.x, u, v), comments)
    X, Y = grid.mesh()
    corner = np.zeros(grid.shape, dtype=bool)
    corner[[0, 0, -1, -1], [0, -1, 0, -1]] = True
    rows = zip(X.ravel(), Y.ravel(), u, v, corner.ravel())
    return write_csv(path, ("x", "y", "u", "v", "corner"), rows, comments)


def write_roots_csv(path, roots: Sequence[complex], residuals: Sequence[float], comments: Sequence[str] = ()) -> Path:
    return write_csv(path, ("re", "im", "residual"), ((r.real, r.imag, e) for r, e in zip(roots, residuals)), comments)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no inf/nan; keep them readable and reversible
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj))
    return path
