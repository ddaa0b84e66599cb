"""Rectangular lattices, centred finite differences, multilinear interpolation.

Fields live on the nodes of a :class:`Grid` as numpy arrays whose leading
``grid.dim`` axes index the node and whose trailing axes carry the value
(scalar, vector, or an ``n x n`` symmetric matrix).

Two boundary modes are supported:

``PERIODIC``
    The lattice is a flat torus of period ``shape[a] * spacing[a]``.
``DIRICHLET``
    The metric is clamped to the flat background: the outermost ring of nodes
    and a ghost layer outside it hold the identity matrix.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import OutsideDomain


class Boundary(str, enum.Enum):
    PERIODIC = "periodic"
    DIRICHLET = "dirichlet"

    @classmethod
    def parse(cls, value) -> "Boundary":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {
            "periodic": cls.PERIODIC,
            "torus": cls.PERIODIC,
            "dirichlet": cls.DIRICHLET,
            "dirichlet-to-h": cls.DIRICHLET,
            "dirichlettoh": cls.DIRICHLET,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown boundary mode {value!r}") from None


@dataclass(frozen=True)
class Grid:
    dim: int
    shape: tuple
    spacing: tuple
    boundary: Boundary
    origin: tuple

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def periods(self) -> np.ndarray:
        """Torus periods (periodic grids); the node span otherwise."""
        n = np.asarray(self.shape, dtype=float)
        if self.boundary is Boundary.PERIODIC:
            return n * np.asarray(self.spacing)
        return (n - 1) * np.asarray(self.spacing)

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.origin) + 0.5 * (np.asarray(self.shape) - 1) * np.asarray(self.spacing)

    def axis_coords(self, axis, width=0) -> np.ndarray:
        k = np.arange(-width, self.shape[axis] + width)
        return self.origin[axis] + k * self.spacing[axis]

    def coords(self, width=0) -> np.ndarray:
        """Node coordinates, shape ``(*shape, dim)``; ``width`` adds ghost layers."""
        axes = [self.axis_coords(a, width) for a in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def interior_mask(self) -> np.ndarray:
        """Nodes whose values evolve: all of them on a torus, all but the outer ring otherwise."""
        mask = np.ones(self.shape, dtype=bool)
        if self.boundary is Boundary.DIRICHLET:
            for a in range(self.dim):
                idx = [slice(None)] * self.dim
                idx[a] = [0, self.shape[a] - 1]
                mask[tuple(idx)] = False
        return mask

    def boundary_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def neighbor(self, node, axis, offset=1):
        """Index of the node ``offset`` steps along ``axis``; ``None`` for a Dirichlet ghost."""
        _check_axis(self, axis)
        node = list(node)
        k = node[axis] + offset
        if self.boundary is Boundary.PERIODIC:
            node[axis] = k % self.shape[axis]
        elif not 0 <= k < self.shape[axis]:
            return None
        else:
            node[axis] = k
        return tuple(node)

    def identity_field(self) -> np.ndarray:
        return np.broadcast_to(np.eye(self.dim), self.shape + (self.dim, self.dim)).copy()

    def refined(self, factor=2) -> "Grid":
        """Same physical domain at ``factor`` times the resolution."""
        if self.boundary is Boundary.PERIODIC:
            shape = tuple(factor * s for s in self.shape)
        else:
            shape = tuple(factor * (s - 1) + 1 for s in self.shape)
        return Grid(self.dim, shape, tuple(h / factor for h in self.spacing), self.boundary, self.origin)


def make_grid(dim, shape, spacing, boundary="periodic", origin=None) -> Grid:
    """Validated constructor for :class:`Grid`.

    ``spacing`` may be a scalar (isotropic) or one value per axis.
    """
    if not isinstance(dim, (int, np.integer)) or not 2 <= dim <= 4:
        raise ValueError(f"dim must be 2, 3 or 4, got {dim!r}")
    dim = int(dim)
    if np.isscalar(shape):
        shape = (int(shape),) * dim
    shape = tuple(int(s) for s in shape)
    if len(shape) != dim:
        raise ValueError(f"shape {shape} does not have {dim} entries")
    if min(shape) < 8:
        raise ValueError(f"every axis needs at least 8 nodes, got {shape}")
    if np.isscalar(spacing):
        spacing = (float(spacing),) * dim
    spacing = tuple(float(h) for h in spacing)
    if len(spacing) != dim:
        raise ValueError(f"spacing {spacing} does not have {dim} entries")
    if not all(h > 0 and np.isfinite(h) for h in spacing):
        raise ValueError(f"spacings must be positive, got {spacing}")
    origin = (0.0,) * dim if origin is None else tuple(float(o) for o in origin)
    if len(origin) != dim:
        raise ValueError(f"origin {origin} does not have {dim} entries")
    return Grid(dim, shape, spacing, Boundary.parse(boundary), origin)


def _check_axis(grid, axis):
    if not 0 <= axis < grid.dim:
        raise IndexError(f"axis {axis} out of range for a {grid.dim}-dimensional grid")


def pad(field, grid, width=1, ghost=None) -> np.ndarray:
    """Surround a nodal field with ``width`` ghost layers.

    Periodic grids wrap around. Dirichlet ghosts default to the identity matrix
    for metric-shaped fields and to zero otherwise; ``ghost`` overrides this with
    a constant, or with a callable evaluated at the ghost-node coordinates.
    """
    field = np.asarray(field, dtype=float)
    d = grid.dim
    if field.shape[:d] != grid.shape:
        raise ValueError(f"field shape {field.shape} does not match grid shape {grid.shape}")
    if grid.boundary is Boundary.PERIODIC:
        spec = [(width, width)] * d + [(0, 0)] * (field.ndim - d)
        return np.pad(field, spec, mode="wrap")

    trailing = field.shape[d:]
    pshape = tuple(s + 2 * width for s in grid.shape)
    if callable(ghost):
        out = np.array(np.broadcast_to(ghost(grid.coords(width)), pshape + trailing), dtype=float)
    else:
        if ghost is None:
            ghost = np.eye(d) if trailing == (d, d) else 0.0
        out = np.empty(pshape + trailing)
        out[...] = ghost
    out[(slice(width, -width),) * d] = field
    return out


def _view(padded, dim, width, offsets):
    idx = []
    for a in range(dim):
        n = padded.shape[a] - 2 * width
        idx.append(slice(width + offsets[a], width + offsets[a] + n))
    return padded[tuple(idx)]


def _at(result, node):
    return result if node is None else result[tuple(node)]


def diff1(field, grid, axis, node=None, ghost=None):
    """Second-order central difference along ``axis`` (whole field, or one ``node``)."""
    _check_axis(grid, axis)
    P = pad(field, grid, 1, ghost)
    e = [0] * grid.dim
    e[axis] = 1
    hi = _view(P, grid.dim, 1, e)
    e[axis] = -1
    lo = _view(P, grid.dim, 1, e)
    return _at((hi - lo) / (2.0 * grid.spacing[axis]), node)


def diff2(field, grid, axis_a, axis_b, node=None, ghost=None):
    """Centred second derivative: 3-point on the diagonal, 4-corner cross stencil off it."""
    _check_axis(grid, axis_a)
    _check_axis(grid, axis_b)
    P = pad(field, grid, 1, ghost)
    d = grid.dim

    def shifted(*moves):
        o = [0] * d
        for ax, step in moves:
            o[ax] += step
        return _view(P, d, 1, o)

    a, b = axis_a, axis_b
    if a == b:
        res = (shifted((a, 1)) - 2.0 * shifted() + shifted((a, -1))) / grid.spacing[a] ** 2
    else:
        res = (
            shifted((a, 1), (b, 1))
            - shifted((a, 1), (b, -1))
            - shifted((a, -1), (b, 1))
            + shifted((a, -1), (b, -1))
        ) / (4.0 * grid.spacing[a] * grid.spacing[b])
    return _at(res, node)


def gradient(field, grid, ghost=None):
    """All first partials stacked on a new axis right after the node axes."""
    return np.stack([diff1(field, grid, a, ghost=ghost) for a in range(grid.dim)], axis=grid.dim)


def hessian(field, grid, ghost=None):
    """All second partials, shape ``(*shape, dim, dim, *trailing)``."""
    d = grid.dim
    rows = []
    for a in range(d):
        rows.append(np.stack([diff2(field, grid, a, b, ghost=ghost) for b in range(d)], axis=d))
    return np.stack(rows, axis=d)


def laplacian(field, grid, ghost=None):
    return sum(diff2(field, grid, a, a, ghost=ghost) for a in range(grid.dim))


def sym_eigenvalues(S) -> np.ndarray:
    """Ascending eigenvalues of one symmetric matrix or a stack of them (cyclic Jacobi)."""
    return kernels.sym_eigvals(S)


def _locate(grid, positions):
    pos = np.asarray(positions, dtype=float)
    if pos.shape[-1] != grid.dim:
        raise ValueError(f"positions need a trailing axis of length {grid.dim}")
    origin = np.asarray(grid.origin)
    h = np.asarray(grid.spacing)
    n = np.asarray(grid.shape)
    rel = (pos - origin) / h
    snap = np.round(rel)
    rel = np.where(np.abs(rel - snap) <= 1e-12 * np.maximum(1.0, np.abs(snap)), snap, rel)  # exact at nodes
    if grid.boundary is Boundary.PERIODIC:
        base = np.floor(rel)
        frac = rel - base
        base = base.astype(np.int64) % n
    else:
        tol = 1e-9
        if np.any(rel < -tol) or np.any(rel > (n - 1) + tol):
            raise OutsideDomain("position outside the Dirichlet domain")
        rel = np.clip(rel, 0, n - 1)
        base = np.minimum(np.floor(rel), n - 2)
        frac = rel - base
        base = base.astype(np.int64)
    return base, frac


def interpolation_weights(grid, position):
    """``[(node, weight), ...]`` of the multilinear stencil at one position."""
    base, frac = _locate(grid, np.asarray(position, dtype=float)[None, :])
    base, frac = base[0], frac[0]
    out = []
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = 1.0
        node = []
        for a, c in enumerate(corner):
            w *= frac[a] if c else 1.0 - frac[a]
            node.append(int((base[a] + c) % grid.shape[a]))
        out.append((tuple(node), w))
    return out


def interpolate(field, grid, positions):
    """Multilinear interpolation of a nodal field at arbitrary positions.

    ``positions`` has shape ``(..., dim)``; the result has shape
    ``(..., *trailing)``. Periodic grids wrap; on Dirichlet grids a position
    outside the node span raises :class:`OutsideDomain`.
    """
    field = np.asarray(field, dtype=float)
    base, frac = _locate(grid, positions)
    trailing = field.shape[grid.dim:]
    expand = (slice(None),) * frac[..., 0].ndim + (None,) * len(trailing)
    out = np.zeros(frac.shape[:-1] + trailing)
    for corner in itertools.product((0, 1), repeat=grid.dim):
        w = np.ones(frac.shape[:-1])
        idx = []
        for a, c in enumerate(corner):
            w = w * (frac[..., a] if c else 1.0 - frac[..., a])
            idx.append((base[..., a] + c) % grid.shape[a])
        out += w[expand] * field[tuple(idx)]
    return out
