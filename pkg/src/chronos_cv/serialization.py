"""JSON and CSV encodings for matrices, fields and tabulated densities.

Matrices are stored as ``{"rows": int, "cols": int, "data": [...]}`` with the
data in row-major order. Real matrices hold plain numbers; complex matrices hold
``[re, im]`` pairs.
"""

from __future__ import annotations

import hashlib
import json
import platform
from pathlib import Path

import numpy as np


def matrix_to_json(matrix, *, force_complex: bool = False) -> dict:
    m = np.atleast_2d(np.asarray(matrix))
    rows, cols = m.shape
    flat = m.reshape(-1)
    if np.iscomplexobj(flat) or force_complex:
        data = [[float(z.real), float(z.imag)] for z in flat.astype(complex)]
    else:
        data = [float(x) for x in flat]
    return {"rows": int(rows), "cols": int(cols), "data": data}


def matrix_from_json(obj: dict) -> np.ndarray:
    rows, cols, data = obj["rows"], obj["cols"], obj["data"]
    if len(data) != rows * cols:
        raise ValueError(f"matrix JSON declares {rows}x{cols} but holds {len(data)} entries")
    if data and isinstance(data[0], (list, tuple)):
        arr = np.array([complex(re, im) for re, im in data], dtype=complex)
    else:
        arr = np.array(data, dtype=float)
    return arr.reshape(rows, cols)


def vector_to_json(vec) -> dict:
    return matrix_to_json(np.asarray(vec).reshape(1, -1))


def canonical_hash(obj) -> str:
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(payload).hexdigest()


def environment_versions() -> dict:
    import pydantic
    import scipy

    from . import __version__

    return {
        "chronos_cv": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.__version__,
        "python": platform.python_version(),
    }


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    """Write rows with a fixed round-trip float format so identical inputs give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.atleast_2d(np.asarray(rows, dtype=float))
    if arr.size and arr.shape[1] != len(header):
        raise ValueError(f"{arr.shape[1]} columns but {len(header)} header names")
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if arr.size:
            np.savetxt(fh, arr, delimiter=",", fmt="%.17g")
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data
