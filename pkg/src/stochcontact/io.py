"""CSV and JSON writers with byte-stable formatting.

Floats are written with ``repr`` so that they round-trip exactly; CSV files
use a header row, ``,`` separators and LF line endings; JSON is pretty
printed with sorted keys.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .cumulants import PathEnsemble
from .errors import ContractViolation

__all__ = [
    "fmt",
    "write_csv",
    "read_csv",
    "write_json",
    "to_jsonable",
    "trajectory_columns",
    "write_trajectory",
    "read_trajectory",
    "write_density",
    "write_path",
    "write_ensemble",
    "read_ensemble",
]


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(v) for v in row] for row in r if row]
    return header, np.array(data, dtype=float).reshape(-1, len(header))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    text = json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False)
    with open(path, "w", newline="\n") as fh:
        fh.write(text + "\n")
    return path


def trajectory_columns(n: int, eps: bool = True):
    cols = ["t"] + [f"y{i + 1}" for i in range(n)] + [f"wp{i + 1}" for i in range(n)]
    return cols + ["eps"] if eps else cols


def write_trajectory(path, t, y, wp, eps) -> Path:
    n = y.shape[1]
    rows = np.column_stack([t, y, wp, eps])
    return write_csv(path, trajectory_columns(n), rows)


def read_trajectory(path):
    """``(t, y, wp, eps)`` from a trajectory CSV; ``eps`` may be absent."""
    header, data = read_csv(path)
    if not header or header[0] != "t":
        raise ContractViolation(f"{path}: first column must be 't'")
    n = sum(1 for h in header if h.startswith("y"))
    if header[: 2 * n + 1] != trajectory_columns(n, eps=False):
        raise ContractViolation(f"{path}: unexpected columns {header}")
    eps = data[:, 2 * n + 1] if len(header) > 2 * n + 1 else None
    return data[:, 0], data[:, 1 : n + 1], data[:, n + 1 : 2 * n + 1], eps


def write_density(path, P) -> Path:
    axes = P.axes()
    mesh = [Y.ravel() for Y in np.meshgrid(*axes, indexing="ij")]
    header = [f"y{i + 1}" for i in range(P.dim)] + ["p"]
    return write_csv(path, header, np.column_stack(mesh + [P.values.ravel()]))


def write_path(path, s, nodes, cumulative) -> Path:
    n = nodes.shape[1]
    header = ["s"] + [f"y{i + 1}" for i in range(n)] + ["dP_cum"]
    return write_csv(path, header, np.column_stack([s, nodes, cumulative]))


def write_ensemble(path, E) -> Path:
    N, J, n = E.samples.shape
    header = ["sample_id", "t"] + [f"S{i + 1}" for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(N):
            for j in range(J):
                w.writerow([str(i), fmt(E.t[j])] + [fmt(v) for v in E.samples[i, j]])
    return Path(path)


def read_ensemble(path, seed: int = 0, model: str = "imported"):
    header, data = read_csv(path)
    if header[:2] != ["sample_id", "t"]:
        raise ContractViolation(f"{path}: ensemble CSV must start with sample_id,t")
    ids = data[:, 0].astype(int)
    N = ids.max() + 1
    J = data.shape[0] // N
    if J * N != data.shape[0] or not np.array_equal(ids, np.repeat(np.arange(N), J)):
        raise ContractViolation(f"{path}: every sample must list the same time grid in order")
    t = data[:J, 1]
    if not all(np.array_equal(data[i * J : (i + 1) * J, 1], t) for i in range(N)):
        raise ContractViolation(f"{path}: samples do not share a time grid")
    return PathEnsemble(data[:, 2:].reshape(N, J, -1), t, seed, model)
