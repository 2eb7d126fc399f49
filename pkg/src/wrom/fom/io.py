"""Binary array files and snapshot archives.

Array file layout: 16-byte header ``b"WROM"`` + uint32 version + uint32 rows
+ uint32 cols (all little-endian), then rows*cols little-endian float64
values in row-major order.  One-dimensional arrays are stored as a single
column.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import InvalidArgument

MAGIC = b"WROM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_array(path, a) -> None:
    a = np.asarray(a, dtype="<f8")
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidArgument(f"only 1-D or 2-D arrays can be stored, got ndim={a.ndim}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_array(path) -> np.ndarray:
    """Read an array file; a single-column file comes back 2-D (n, 1)."""
    with open(path, "rb") as fh:
        magic, version, rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise InvalidArgument(f"{path}: not a WROM array file")
        if version != VERSION:
            raise InvalidArgument(f"{path}: unsupported version {version}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise InvalidArgument(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def read_vector(path) -> np.ndarray:
    return read_array(path)[:, 0]


def save_snapshots(directory, solutions, *, mesh_hash: str, strategy: str,
                   seed=None, weights=None, extra=None) -> Path:
    """Write one velocity/pressure file pair per truth solution plus a manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, sol in enumerate(solutions):
        write_array(directory / f"u_{i:05d}.bin", sol.velocity)
        write_array(directory / f"p_{i:05d}.bin", sol.pressure)
        entries.append({
            "index": i,
            "y": [float(v) for v in sol.y],
            "v_max": float(sol.y[4]),
            "weight": None if weights is None else float(weights[i]),
        })
    manifest = {
        "format": "wrom-snapshots",
        "version": VERSION,
        "mesh_hash": mesh_hash,
        "strategy": strategy,
        "seed": seed,
        "parameters": entries,
    }
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory


def load_snapshots(directory):
    """Return (manifest, velocity matrix, pressure matrix), snapshots as columns."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    n = len(manifest["parameters"])
    U = np.column_stack([read_vector(directory / f"u_{i:05d}.bin") for i in range(n)])
    P = np.column_stack([read_vector(directory / f"p_{i:05d}.bin") for i in range(n)])
    return manifest, U, P
