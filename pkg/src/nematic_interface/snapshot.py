"""Binary snapshots of grid fields.

Layout: the magic line ``QTNSNAP1\\n``, one line of UTF-8 JSON metadata, then
the raw little-endian float64 arrays (row-major) in header order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import PeriodicGrid, PressureField, QField, VelocityField

MAGIC = b"QTNSNAP1\n"
SCHEMA = 1


class SnapshotError(ValueError):
    pass


class SnapshotFormatError(SnapshotError):
    """The file does not start with the snapshot magic or the header is unreadable."""


class SnapshotDimensionError(SnapshotError):
    """A stored field's shape disagrees with the grid in the header."""


class SnapshotTruncatedError(SnapshotError):
    """The payload is shorter (or longer) than the header promises."""


@dataclass
class Snapshot:
    meta: dict
    fields: dict

    @property
    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.meta["nx"], self.meta["ny"], self.meta["Lx"], self.meta["Ly"])


def _raw(value) -> np.ndarray:
    data = value.data if isinstance(value, (QField, VelocityField, PressureField)) else value
    return np.ascontiguousarray(np.asarray(data, dtype="<f8"))


def save_snapshot(fields: dict, path, grid: PeriodicGrid, t: float = 0.0, eps: float | None = None, params: dict | None = None):
    """Write ``fields`` (name -> field object or array ending in ``(nx, ny)``)."""
    arrays = {name: _raw(v) for name, v in fields.items()}
    for name, a in arrays.items():
        if a.shape[-2:] != grid.dims:
            raise SnapshotDimensionError(f"field {name!r} has shape {a.shape}, grid is {grid.dims}")
    meta = {
        "schema": SCHEMA,
        "nx": grid.nx,
        "ny": grid.ny,
        "Lx": grid.Lx,
        "Ly": grid.Ly,
        "t": float(t),
        "eps": eps,
        "params": params or {},
        "fields": [{"name": n, "shape": list(a.shape)} for n, a in arrays.items()],
    }
    header = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header + b"\n")
        for a in arrays.values():
            fh.write(a.tobytes(order="C"))


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise SnapshotFormatError("not a snapshot file (bad magic)")
    line = fh.readline()
    try:
        meta = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SnapshotFormatError(f"unreadable snapshot header: {exc}") from None
    for key in ("schema", "nx", "ny", "Lx", "Ly", "fields"):
        if key not in meta:
            raise SnapshotFormatError(f"snapshot header lacks {key!r}")
    return meta


def read_snapshot_header(path) -> dict:
    """Metadata only; the arrays are not read."""
    with open(path, "rb") as fh:
        return _read_header(fh)


def load_snapshot(path) -> Snapshot:
    path = Path(path)
    with open(path, "rb") as fh:
        meta = _read_header(fh)
        payload = fh.read()
    dims = (meta["nx"], meta["ny"])
    need = 0
    for entry in meta["fields"]:
        shape = tuple(entry["shape"])
        if shape[-2:] != dims:
            raise SnapshotDimensionError(f"field {entry['name']!r} shape {shape} does not match grid {dims}")
        need += 8 * int(np.prod(shape))
    if len(payload) != need:
        raise SnapshotTruncatedError(f"payload has {len(payload)} bytes, header requires {need}")
    out = {}
    offset = 0
    for entry in meta["fields"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        out[entry["name"]] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape).astype(float)
        offset += 8 * count
    return Snapshot(meta, out)
