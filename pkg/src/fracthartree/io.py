"""Run-directory file formats: atomic writes, CSV tables, binary fields."""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .spectral import RadialField, RadialGrid

MAGIC = b"RADFIELD"
VERSION = 1
# magic, version, n_points, r_max, count
_HEADER = struct.Struct("<8sHIdI")


def atomic_write(path, data: bytes | str) -> Path:
    """Write to a temporary sibling then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else str(x)
    return x


def write_json(path, obj) -> Path:
    return atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=False) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, rows, columns=None) -> Path:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in row.items()})
    return atomic_write(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def encode_fields(fields) -> bytes:
    """Header then little-endian float64 pairs (re, im) for every sample."""
    fields = list(fields)
    if not fields:
        raise ValueError("nothing to encode")
    grid = fields[0].grid
    if any(f.grid != grid for f in fields):
        raise ValueError("fields must share a grid")
    vals = np.stack([np.asarray(f.values, dtype=complex).reshape(-1) for f in fields])
    inter = np.empty(vals.shape + (2,), dtype="<f8")
    inter[..., 0], inter[..., 1] = vals.real, vals.imag
    head = _HEADER.pack(MAGIC, VERSION, grid.n_points, grid.r_max, len(fields))
    return head + inter.tobytes()


def decode_fields(data: bytes) -> list[RadialField]:
    if len(data) < _HEADER.size:
        raise ValueError("truncated field file")
    magic, version, n, r_max, count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ValueError("not a radial field file")
    if version != VERSION:
        raise ValueError(f"unsupported field file version {version}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    if body.size != 2 * n * count:
        raise ValueError("field file size does not match its header")
    grid = RadialGrid(n, r_max)
    vals = body.reshape(count, n, 2)
    return [RadialField(grid, v[:, 0] + 1j * v[:, 1]) for v in vals]


def write_fields(path, fields) -> Path:
    return atomic_write(path, encode_fields(fields))


def read_fields(path) -> list[RadialField]:
    return decode_fields(Path(path).read_bytes())
