"""Binary field snapshots.

Layout: a 64-byte little-endian header followed by the float64 payload in
row-major node order. Metric fields store the packed upper triangle
(``n(n+1)/2`` values per node, row by row), so symmetry survives exactly.

Header::

    0   4s   magic "RRLX"
    4   u16  format version (1)
    6   u8   dim
    7   u8   boundary (0 periodic, 1 dirichlet)
    8   u8   kind (0 metric, 1 scalar, 2 markers)
    9   pad
    10  4*u16 shape (unused axes 0)
    18  6 pad
    24  f64  t
    32  4*f64 spacing (unused axes 0)
"""
import struct
from dataclasses import dataclass

import numpy as np

from .grid import Boundary, Grid, make_grid

MAGIC = b"RRLX"
VERSION = 1
HEADER = struct.Struct("<4sHBBBx4H6xd4d")
assert HEADER.size == 64

KINDS = {"metric": 0, "scalar": 1, "markers": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}
_BOUNDARY_CODES = {Boundary.PERIODIC: 0, Boundary.DIRICHLET: 1}


@dataclass
class Snapshot:
    grid: Grid
    kind: str
    t: float
    data: np.ndarray


def _pack(data, grid, kind):
    n = grid.dim
    data = np.asarray(data, dtype=float)
    if kind == "metric":
        if data.shape != grid.shape + (n, n):
            raise ValueError(f"metric field must have shape {grid.shape + (n, n)}")
        iu = np.triu_indices(n)
        return data[(Ellipsis,) + iu]
    if kind == "scalar":
        if data.shape != grid.shape:
            raise ValueError(f"scalar field must have shape {grid.shape}")
        return data
    if kind == "markers":
        if data.shape != grid.shape + (n,):
            raise ValueError(f"marker field must have shape {grid.shape + (n,)}")
        return data
    raise ValueError(f"unknown field kind {kind!r}")


def _unpack(flat, grid, kind):
    n = grid.dim
    if kind == "metric":
        tri = flat.reshape(grid.shape + (n * (n + 1) // 2,))
        out = np.empty(grid.shape + (n, n))
        for k, (i, j) in enumerate(zip(*np.triu_indices(n))):
            out[..., i, j] = tri[..., k]
            out[..., j, i] = tri[..., k]
        return out
    if kind == "scalar":
        return flat.reshape(grid.shape)
    return flat.reshape(grid.shape + (n,))


def to_bytes(data, grid, kind="metric", t=0.0):
    payload = _pack(data, grid, kind)
    shape = tuple(grid.shape) + (0,) * (4 - grid.dim)
    spacing = tuple(grid.spacing) + (0.0,) * (4 - grid.dim)
    head = HEADER.pack(MAGIC, VERSION, grid.dim, _BOUNDARY_CODES[grid.boundary], KINDS[kind],
                       *shape, float(t), *spacing)
    return head + np.ascontiguousarray(payload, dtype="<f8").tobytes()


def from_bytes(buf):
    if len(buf) < HEADER.size:
        raise ValueError("snapshot shorter than its header")
    magic, version, dim, bcode, kcode, *rest = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    shape = tuple(rest[:4])[:dim]
    t = rest[4]
    spacing = tuple(rest[5:9])[:dim]
    boundary = Boundary.PERIODIC if bcode == 0 else Boundary.DIRICHLET
    kind = _KIND_NAMES.get(kcode)
    if kind is None:
        raise ValueError(f"unknown field kind code {kcode}")
    grid = make_grid(dim, shape, spacing, boundary)
    flat = np.frombuffer(buf, dtype="<f8", offset=HEADER.size).astype(float)
    per = {"metric": dim * (dim + 1) // 2, "scalar": 1, "markers": dim}[kind]
    if flat.size != grid.n_nodes * per:
        raise ValueError(f"payload has {flat.size} values, expected {grid.n_nodes * per}")
    return Snapshot(grid, kind, t, _unpack(flat, grid, kind))


def write_snapshot(path, data, grid, kind="metric", t=0.0):
    with open(path, "wb") as fh:
        fh.write(to_bytes(data, grid, kind, t))


def read_snapshot(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
