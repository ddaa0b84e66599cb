"""Seeded initial-data generators.

Metric generators build a symmetric field ``P`` and return ``g = exp(s P)``
with ``s`` chosen so the closeness of ``g`` is exactly ``eps0``: if ``mu`` are
the eigenvalues of ``P`` then those of ``g`` are ``exp(s mu)``, so the
closeness is ``exp(s M) - 1`` with ``M = max(mu_max, -mu_min)``.

Conformal generators return a scalar ``u`` with ``sup|u| = amplitude``.
"""
import numpy as np
from scipy.optimize import brentq

from .grid import Boundary

METRIC_GENERATORS = ("sinusoid", "rough", "bump", "constant")
CONFORMAL_GENERATORS = ("sinusoid", "rough", "bump")


def _sym_exp(P):
    mu, Q = np.linalg.eigh(P)
    return np.einsum("...ik,...k,...jk->...ij", Q, np.exp(mu), Q)


def _zero_ring(field, grid):
    if grid.boundary is Boundary.DIRICHLET:
        field[grid.boundary_mask()] = 0.0
    return field


def _scaled_exp(P, eps0, grid):
    n = grid.dim
    P = _zero_ring(0.5 * (P + np.swapaxes(P, -1, -2)), grid)
    if eps0 == 0.0:
        return np.broadcast_to(np.eye(n), P.shape).copy()
    mu = np.linalg.eigvalsh(P)
    M = max(mu[..., -1].max(), -mu[..., 0].min())
    if M <= 0.0:
        return np.broadcast_to(np.eye(n), P.shape).copy()
    g = _sym_exp(P * (np.log1p(eps0) / M))
    if grid.boundary is Boundary.DIRICHLET:
        g[grid.boundary_mask()] = np.eye(n)
    return 0.5 * (g + np.swapaxes(g, -1, -2))


def _modes(grid):
    """Low-frequency scalar profiles that fit the boundary mode."""
    x = grid.coords() - np.asarray(grid.origin)
    L = grid.periods
    if grid.boundary is Boundary.PERIODIC:
        return lambda k, ph: np.sin((2.0 * np.pi * x / L) @ k + ph)
    return lambda k, ph: np.prod(np.sin(np.pi * np.abs(k) * x / L), axis=-1)


def _sinusoid_scalar(grid, rng, n_modes=3):
    profile = _modes(grid)
    out = np.zeros(grid.shape)
    for _ in range(n_modes):
        if grid.boundary is Boundary.PERIODIC:
            k = rng.integers(-1, 2, size=grid.dim)
            if not k.any():
                k[rng.integers(grid.dim)] = 1
        else:
            k = rng.integers(1, 3, size=grid.dim)
        out += rng.normal() * profile(k, rng.uniform(0.0, 2.0 * np.pi))
    return out


def _bump_profile(grid, radius=None):
    """Smooth compactly supported bump ``exp(1 - 1/(1 - (r/R)^2))`` at the domain centre."""
    if radius is None:
        radius = 0.3 * grid.periods.min()
    r = np.linalg.norm(grid.coords() - grid.center, axis=-1) / radius
    out = np.zeros(grid.shape)
    inside = r < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def sinusoid(grid, eps0, seed=0):
    """Smooth band-limited perturbation: each entry is a few lowest-mode waves."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    P = np.zeros(grid.shape + (n, n))
    for i in range(n):
        for j in range(i, n):
            P[..., i, j] = P[..., j, i] = _sinusoid_scalar(grid, rng)
    return _scaled_exp(P, eps0, grid)


def rough(grid, eps0, seed=0):
    """Independent uniform noise per node on the diagonal (grid-scale roughness)."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    P = np.zeros(grid.shape + (n, n))
    idx = np.arange(n)
    P[..., idx, idx] = rng.uniform(-1.0, 1.0, size=grid.shape + (n,))
    return _scaled_exp(P, eps0, grid)


def bump(grid, eps0, seed=0, radius=None):
    """Compactly supported bump times a fixed random symmetric matrix."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    A = rng.normal(size=(n, n))
    A = A + A.T
    P = _bump_profile(grid, radius)[..., None, None] * A
    return _scaled_exp(P, eps0, grid)


def constant(grid, eps0, seed=0):
    """Spatially constant SPD metric (a fixed point of the flow on a torus)."""
    rng = np.random.default_rng(seed)
    n = grid.dim
    A = rng.normal(size=(n, n))
    P = np.broadcast_to(A + A.T, grid.shape + (n, n)).copy()
    return _scaled_exp(P, eps0, grid)


def metric(name, grid, eps0, seed=0, **kwargs):
    gens = {"sinusoid": sinusoid, "rough": rough, "bump": bump, "constant": constant}
    if name not in gens:
        raise ValueError(f"unknown generator {name!r}; choose from {METRIC_GENERATORS}")
    if not 0.0 <= eps0 < 1.0:
        raise ValueError(f"eps0 must be in [0, 1), got {eps0}")
    return gens[name](grid, eps0, seed, **kwargs)


def conformal(name, grid, amplitude, seed=0, **kwargs):
    """Scalar initial data with ``sup|u0| = amplitude``.

    On a torus ``sum exp(u)`` is conserved by the flow, so the profile is
    shifted to ``mean(exp(u0)) = 1``; otherwise the limit would be a nonzero
    constant. Dirichlet data vanish on the boundary ring.
    """
    if grid.dim != 2:
        raise ValueError("conformal flow is two-dimensional")
    rng = np.random.default_rng(seed)
    if name == "sinusoid":
        w = _sinusoid_scalar(grid, rng)
    elif name == "rough":
        w = rng.uniform(-1.0, 1.0, size=grid.shape)
    elif name == "bump":
        w = _bump_profile(grid, kwargs.get("radius"))
    else:
        raise ValueError(f"unknown generator {name!r}; choose from {CONFORMAL_GENERATORS}")
    w = _zero_ring(w, grid)
    if amplitude == 0.0 or not np.any(w):
        return np.zeros(grid.shape)
    if grid.boundary is Boundary.DIRICHLET:
        return w * (amplitude / np.abs(w).max())

    def shifted(s):
        v = s * w
        c = np.log(np.mean(np.exp(v - v.max()))) + v.max()
        return v - c

    s = brentq(lambda s: np.abs(shifted(s)).max() - amplitude, 0.0, 10.0 * amplitude / np.abs(w).max())
    u = shifted(s)
    return u * (amplitude / np.abs(u).max())
