"""Pointwise differential geometry of a discrete metric field.

Christoffel symbols, Ricci tensor and DeTurck vector in the coordinates where
the background metric is the identity (so its Christoffel symbols vanish).
All derivatives are centred differences; the Ricci tensor differentiates a
locally evaluated Christoffel field, so it needs two ghost layers.

:func:`rhs_ricci_deturck` is written from the geometric definition
``-2 Ric + L_V g`` and is deliberately independent of the expanded form in
:mod:`ricci_deturck.hflow`; the two are checked against each other.

Index conventions for returned arrays (node axes first):

* Christoffel ``G[..., k, i, j]`` is the symbol with upper index ``k``.
* Derivative stacks put the differentiation index first.
"""
import numpy as np

from .errors import NonPositiveDefinite
from .grid import _at, pad, sym_eigenvalues

PD_FLOOR = 1e-10


def inverse_metric(g):
    """Inverse of one SPD matrix or a stack of them.

    Raises :class:`NonPositiveDefinite` when an eigenvalue is at or below 1e-10.
    """
    g = np.asarray(g, dtype=float)
    lam = sym_eigenvalues(g)
    if np.any(lam[..., 0] <= PD_FLOOR):
        raise NonPositiveDefinite(f"smallest eigenvalue {lam[..., 0].min():.3e} <= {PD_FLOOR}")
    ginv = np.linalg.inv(g)
    return 0.5 * (ginv + np.swapaxes(ginv, -1, -2))


def _dstack(P, spacing, dim):
    """Central differences on a padded array; the result loses one layer per side."""
    out = []
    inner = [slice(1, -1)] * dim
    for a in range(dim):
        hi = list(inner)
        lo = list(inner)
        hi[a] = slice(2, None)
        lo[a] = slice(None, -2)
        out.append((P[tuple(hi)] - P[tuple(lo)]) / (2.0 * spacing[a]))
    return np.stack(out, axis=dim)


def _shrink(P, dim, k=1):
    return P[(slice(k, -k),) * dim]


def _christoffel_padded(P, spacing, dim):
    """Christoffel symbols on a padded metric array (one layer lost per side)."""
    dg = _dstack(P, spacing, dim)  # dg[..., c, l, j] = d_c g_lj
    g = _shrink(P, dim)
    ginv = inverse_metric(g)
    lower = (
        np.einsum("...ilj->...lij", dg)
        + np.einsum("...jli->...lij", dg)
        - dg
    )
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, lower)


def christoffel(g, grid, node=None):
    """Christoffel symbols of the metric field, shape ``(*shape, n, n, n)``."""
    G = _christoffel_padded(pad(g, grid, 1), grid.spacing, grid.dim)
    return _at(G, node)


def _deturck_from(G, ginv):
    return np.einsum("...rs,...ars->...a", ginv, G)


def deturck_vector(g, grid, node=None, covariant=False):
    """DeTurck vector ``V^a = g^{rs} Gamma^a_rs`` (or ``V_i = g_ik V^k`` when ``covariant``)."""
    g = np.asarray(g, dtype=float)
    G = christoffel(g, grid)
    V = _deturck_from(G, inverse_metric(g))
    if covariant:
        V = np.einsum("...ik,...k->...i", g, V)
    return _at(V, node)


def _ricci_parts(g, grid):
    """Ricci tensor plus the intermediate fields reused by the DeTurck oracle."""
    dim = grid.dim
    P = pad(g, grid, 2)
    G1 = _christoffel_padded(P, grid.spacing, dim)  # one ghost layer left
    dG = _dstack(G1, grid.spacing, dim)  # dG[..., c, k, i, j] = d_c Gamma^k_ij
    G = _shrink(G1, dim)
    ric = (
        np.einsum("...kkij->...ij", dG)
        - np.einsum("...ikkj->...ij", dG)
        + np.einsum("...kkl,...lij->...ij", G, G)
        - np.einsum("...kil,...lkj->...ij", G, G)
    )
    ric = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    return ric, G1, _shrink(P, dim)


def ricci(g, grid, node=None):
    """Ricci tensor ``R_ij = d_k G^k_ij - d_i G^k_kj + G^k_kl G^l_ij - G^k_il G^l_kj``."""
    ric, _, _ = _ricci_parts(np.asarray(g, dtype=float), grid)
    return _at(ric, node)


def scalar_curvature(g, grid):
    g = np.asarray(g, dtype=float)
    return np.einsum("...ij,...ij->...", inverse_metric(g), ricci(g, grid))


def lie_term(g, grid, node=None):
    """The gauge term ``nabla_i V_j + nabla_j V_i`` with the Levi-Civita connection of g."""
    _, sym = _oracle(np.asarray(g, dtype=float), grid)
    return _at(sym, node)


def _oracle(g, grid):
    dim = grid.dim
    ric, G1, g1 = _ricci_parts(g, grid)
    V1 = _deturck_from(G1, inverse_metric(g1))
    Vl1 = np.einsum("...ik,...k->...i", g1, V1)  # covariant V on the one-ghost region
    dV = _dstack(Vl1, grid.spacing, dim)  # dV[..., i, j] = d_i V_j
    G = _shrink(G1, dim)
    Vl = _shrink(Vl1, dim)
    nabla = dV - np.einsum("...kij,...k->...ij", G, Vl)
    return ric, nabla + np.swapaxes(nabla, -1, -2)


def rhs_ricci_deturck(g, grid, node=None):
    """``-2 R_ij + nabla_i V_j + nabla_j V_i``: the geometric form of the h-flow velocity."""
    ric, sym = _oracle(np.asarray(g, dtype=float), grid)
    out = -2.0 * ric + sym
    return _at(0.5 * (out + np.swapaxes(out, -1, -2)), node)
