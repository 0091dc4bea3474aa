"""Binary field snapshots, metadata sidecars, and CSV slice export.

Snapshot layout (little endian): magic b"QHDF", version u32, dimension u32,
resolution u32, component count u32, complex flag u32, then the payload as
row-major float64 with complex values interleaved (re, im).
"""

from __future__ import annotations

import json
import struct
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .spectral import ScalarField, TorusGrid, VectorField

MAGIC = b"QHDF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class SnapshotError(ConfigError):
    """Malformed or truncated snapshot file."""


def save_field(path, f) -> None:
    """Write a ScalarField or VectorField (real or complex) to disk."""
    if isinstance(f, ScalarField):
        comps = 1
        payload = f.values[np.newaxis]
    elif isinstance(f, VectorField):
        comps = f.grid.dimension
        payload = f.values
    else:
        raise TypeError(f"cannot snapshot object of type {type(f).__name__}")
    is_complex = np.iscomplexobj(payload)
    header = _HEADER.pack(MAGIC, VERSION, f.grid.dimension,
                          f.grid.resolution, comps, int(is_complex))
    if is_complex:
        flat = np.ascontiguousarray(payload, dtype=np.complex128)
        raw = flat.astype("<c16").tobytes()
    else:
        raw = np.ascontiguousarray(payload, dtype="<f8").tobytes()
    Path(path).write_bytes(header + raw)


def load_field(path, dealias_fraction: Fraction = Fraction(2, 3)):
    """Read a snapshot back; returns a ScalarField or VectorField."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise SnapshotError(f"{path}: file shorter than header")
    magic, version, dim, res, comps, cflag = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    if dim not in (1, 2) or comps not in (1, dim):
        raise SnapshotError(f"{path}: inconsistent header (n={dim}, arity={comps})")
    count = comps * res ** dim
    itemsize = 16 if cflag else 8
    expected = _HEADER.size + count * itemsize
    if len(blob) != expected:
        raise SnapshotError(
            f"{path}: payload has {len(blob) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size}")
    dtype = "<c16" if cflag else "<f8"
    payload = np.frombuffer(blob, dtype=dtype, offset=_HEADER.size).copy()
    payload = payload.reshape((comps,) + (res,) * dim)
    grid = TorusGrid(dim, res, dealias_fraction)
    if comps == 1:
        return ScalarField(grid, payload[0])
    return VectorField(grid, payload)


def write_sidecar(path, metadata: dict) -> None:
    """Deterministic JSON sidecar next to a snapshot."""
    side = Path(str(path) + ".meta.json")
    side.write_text(json.dumps(metadata, sort_keys=True, indent=1) + "\n")


def read_sidecar(path) -> dict:
    return json.loads(Path(str(path) + ".meta.json").read_text())


def format_float(x) -> str:
    """Shortest round-tripping decimal; shared by every CSV writer."""
    return repr(float(x))


def export_slice(path, f, axis: int = 0, index: int = 0) -> None:
    """Dump a 1D slice of a field as CSV with node coordinates.

    For a 2D field the slice runs along `axis` with the other index fixed.
    """
    grid = f.grid
    x = np.arange(grid.resolution) * (2.0 * np.pi / grid.resolution)
    comps = f.values[np.newaxis] if isinstance(f, ScalarField) else f.values
    if grid.dimension == 2:
        comps = comps[:, index, :] if axis == 1 else comps[:, :, index]
    rows = []
    names = ["x"]
    for c in range(comps.shape[0]):
        suffix = f"_{c + 1}" if comps.shape[0] > 1 else ""
        if np.iscomplexobj(comps):
            names += [f"re{suffix}", f"im{suffix}"]
        else:
            names += [f"value{suffix}"]
    for i in range(grid.resolution):
        cells = [format_float(x[i])]
        for c in range(comps.shape[0]):
            v = comps[c, i]
            if np.iscomplexobj(comps):
                cells += [format_float(v.real), format_float(v.imag)]
            else:
                cells += [format_float(v)]
        rows.append(",".join(cells))
    Path(path).write_text(",".join(names) + "\n" + "\n".join(rows) + "\n")
