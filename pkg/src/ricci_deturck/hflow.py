"""Explicit time integration of the h-flow (Ricci-DeTurck flow with flat background).

The velocity is the expanded quasilinear form

    g^{ab} d_a d_b g_ij + 1/2 g^{ab} g^{pq} (quadratic terms in dg),

evaluated by the compiled kernel when available. Stepping is midpoint RK2
with a CFL-limited step; Dirichlet grids keep the boundary ring at the
identity after every stage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import Blowup, ClosenessCeilingExceeded, NonPositiveDefinite
from .grid import Boundary, Grid, _at, pad, sym_eigenvalues


@dataclass
class FlowState:
    grid: Grid
    g: np.ndarray
    t: float = 0.0
    step: int = 0

    def copy(self) -> "FlowState":
        return FlowState(self.grid, self.g.copy(), self.t, self.step)


@dataclass
class InitialData:
    grid: Grid
    g0: np.ndarray
    epsilon0: float

    @classmethod
    def from_field(cls, grid, g0):
        from .diagnostics import closeness_epsilon

        eps = closeness_epsilon(g0)
        if not eps < 1.0:
            raise ValueError(f"initial data is {eps:.3g}-close to flat; need < 1")
        return cls(grid, np.asarray(g0, dtype=float), eps)


def hflow_rhs(g, grid, node=None):
    """h-flow velocity at every node (or one ``node``), shape ``(*shape, n, n)``."""
    out = kernels.hflow_rhs(pad(g, grid, 1), grid.spacing)
    return _at(out, node)


def impose_boundary(g, grid):
    """Reset the Dirichlet boundary ring to the identity (in place); no-op on a torus."""
    if grid.boundary is Boundary.DIRICHLET:
        g[grid.boundary_mask()] = np.eye(grid.dim)
    return g


def cfl_dt(state, safety=0.25):
    """Stable explicit step ``safety * min(dx)^2 / (2 n sup lambda_max(g^-1))``."""
    if not 0.0 < safety <= 1.0:
        raise ValueError(f"safety must be in (0, 1], got {safety}")
    lam_min = sym_eigenvalues(state.g)[..., 0].min()
    if lam_min <= 0.0:
        raise NonPositiveDefinite(f"smallest eigenvalue {lam_min:.3e}")
    n = state.grid.dim
    return safety * min(state.grid.spacing) ** 2 * lam_min / (2.0 * n)


def step(state, dt):
    """One midpoint RK2 step; raises NonPositiveDefinite if positivity is lost."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    limit = cfl_dt(state, 1.0)
    if dt > limit * (1.0 + 1e-12):
        raise ValueError(f"dt={dt:.3e} exceeds the CFL limit {limit:.3e}")
    grid = state.grid
    g = state.g
    gm = impose_boundary(g + (0.5 * dt) * hflow_rhs(g, grid), grid)
    gn = impose_boundary(g + dt * hflow_rhs(gm, grid), grid)
    lam_min = sym_eigenvalues(gn)[..., 0].min()
    if not lam_min > 0.0:
        raise NonPositiveDefinite(f"positivity lost at t={state.t + dt:.6g} (min eigenvalue {lam_min:.3e})")
    return FlowState(grid, gn, state.t + dt, state.step + 1)


def cutoff_eta(grid, radius):
    """Cosine ramp: 1 on r <= radius-2, 0 on r >= radius-1 (r from the domain centre)."""
    if grid.boundary is not Boundary.DIRICHLET:
        raise ValueError("cutoff initial data needs a Dirichlet grid")
    if radius < 2.0:
        raise ValueError(f"cutoff radius must be >= 2, got {radius}")
    half = 0.5 * grid.periods
    if radius - 1.0 > half.min() + 1e-12:
        raise ValueError(f"cutoff radius {radius} too large: ball of radius {radius - 1} leaves the box")
    r = np.linalg.norm(grid.coords() - grid.center, axis=-1)
    s = np.clip(r - radius + 2.0, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * s))


def cutoff_initial(g0, grid, radius):
    """Blend ``g0`` to the identity: ``eta g0 + (1 - eta) I``; returns ``(g, eta)``."""
    eta = cutoff_eta(grid, radius)[..., None, None]
    g = eta * np.asarray(g0, dtype=float) + (1.0 - eta) * np.eye(grid.dim)
    return impose_boundary(g, grid), eta[..., 0, 0]


def run(initial, t_end, safety=0.25, record_every=1, m=6, p=1, delta=0.0,
        eps_ceiling=0.5, on_step=None, max_steps=None):
    """Integrate to ``t_end``; returns ``(final_state, records)``.

    ``on_step(prev, new, dt)`` is called after every step (marker advection
    hooks in here) and may return a dict of extra record fields.
    """
    from .diagnostics import record

    if not t_end > 0.0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    state = FlowState(initial.grid, impose_boundary(np.array(initial.g0, dtype=float), initial.grid))
    records = [record(state, m, p, delta)]
    extra = {}
    while state.t < t_end * (1.0 - 1e-14):
        if max_steps is not None and state.step >= max_steps:
            break
        dt = min(cfl_dt(state, safety), t_end - state.t)
        try:
            new = step(state, dt)
        except NonPositiveDefinite as exc:
            raise Blowup(str(exc), state=state, records=records) from exc
        if on_step is not None:
            extra = on_step(state, new, dt) or {}
        state = new
        if state.step % record_every == 0 or state.t >= t_end * (1.0 - 1e-14):
            rec = record(state, m, p, delta, **extra)
            records.append(rec)
            if rec.eps > eps_ceiling:
                raise ClosenessCeilingExceeded(
                    f"closeness {rec.eps:.4g} above ceiling {eps_ceiling} at t={state.t:.6g}",
                    state=state, records=records,
                )
    return state, records
