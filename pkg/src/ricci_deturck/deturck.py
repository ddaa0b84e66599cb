"""Gauge recovery: from an h-flow solution back to a Ricci flow.

Markers start at the nodes and follow ``d/dt phi = sign * V(phi, t)`` with
``V^a = g^{rs} Gamma^a_rs`` interpolated multilinearly. The pulled-back
metric ``gt = Dphi^T g(phi) Dphi`` then solves ``d/dt gt = -2 Ric(gt)`` for
``sign = -1``; ``sign = +1`` is kept as an option for comparison.

Periodic markers are stored unwrapped, so ``phi - x`` is a periodic field.
On Dirichlet grids V is zeroed on the boundary ring, so ring markers stay
put and interior markers cannot leave.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateJacobian, MarkerEscaped, OutsideDomain
from .geometry import deturck_vector, ricci
from .grid import Boundary, Grid, gradient, interpolate


@dataclass
class DiffeoField:
    grid: Grid
    markers: np.ndarray
    t: float = 0.0

    @classmethod
    def identity(cls, grid, t=0.0):
        return cls(grid, grid.coords(), t)

    def displacement(self):
        """``phi(x) - x`` (a periodic field on a torus)."""
        return self.markers - self.grid.coords()


def velocity(g, grid):
    """Contravariant DeTurck vector field, zero on the Dirichlet boundary ring."""
    V = deturck_vector(g, grid)
    if grid.boundary is Boundary.DIRICHLET:
        V[grid.boundary_mask()] = 0.0
    return V


def _sample(V, grid, pos):
    try:
        return interpolate(V, grid, pos)
    except OutsideDomain as exc:
        raise MarkerEscaped(str(exc)) from None


def advect(diffeo, state_t, state_next, sign=-1.0):
    """Midpoint RK2 for the markers across one flow step.

    The first stage samples V at ``t``; the second samples the average of the
    fields at ``t`` and ``t + dt`` at the midpoint estimate.
    """
    grid = diffeo.grid
    dt = state_next.t - state_t.t
    if not dt > 0.0:
        raise ValueError("states must be ordered in time")
    V0 = velocity(state_t.g, grid)
    Vm = 0.5 * (V0 + velocity(state_next.g, grid))
    x = diffeo.markers
    k1 = sign * _sample(V0, grid, x)
    k2 = sign * _sample(Vm, grid, x + (0.5 * dt) * k1)
    new = x + dt * k2
    if grid.boundary is Boundary.DIRICHLET:
        _sample(Vm, grid, new)  # raises if a marker left the box
    return DiffeoField(grid, new, state_next.t)


def _min_image(d, grid):
    if grid.boundary is Boundary.PERIODIC:
        L = grid.periods
        d = d - L * np.round(d / L)
    return d


def drift_stats(diffeo, radius=None):
    """``{"sup_drift", "drift_outside_radius"}``; the second is ``None`` without a radius."""
    grid = diffeo.grid
    dist = np.linalg.norm(_min_image(diffeo.displacement(), grid), axis=-1)
    out = {"sup_drift": float(dist.max()), "drift_outside_radius": None}
    if radius is not None:
        r = np.linalg.norm(_min_image(grid.coords() - grid.center, grid), axis=-1)
        far = r > radius
        out["drift_outside_radius"] = float(dist[far].max()) if np.any(far) else 0.0
    return out


def marker_shift(a, b):
    """``sup |phi_b - phi_a|`` between two checkpoints of the same marker field."""
    return float(np.linalg.norm(b.markers - a.markers, axis=-1).max())


def jacobian(diffeo):
    """``J[..., s, a] = d phi^s / d y^a`` by central differences of the displacement."""
    grid = diffeo.grid
    d = grid.dim
    dD = gradient(diffeo.displacement(), grid)  # (..., a, s)
    return np.swapaxes(dD, -1, -2) + np.eye(d)


def jacobian_det(diffeo):
    return np.linalg.det(jacobian(diffeo))


def pullback(diffeo, g):
    """``gt_ab = J^s_a J^k_b g_sk(phi)`` with ``g(phi)`` interpolated per component."""
    grid = diffeo.grid
    J = jacobian(diffeo)
    det = np.linalg.det(J)
    if not np.all(det > 0.0):
        raise DegenerateJacobian(f"Jacobian determinant {det.min():.3e} at some node")
    gphi = _sample(np.asarray(g, dtype=float), grid, diffeo.markers)
    gt = np.einsum("...sa,...sk,...kb->...ab", J, gphi, J)
    return 0.5 * (gt + np.swapaxes(gt, -1, -2))


def residual_mask(grid):
    """Nodes where the residual is meaningful: all on a torus, two rings excluded otherwise."""
    mask = grid.interior_mask()
    if grid.boundary is Boundary.DIRICHLET:
        inner = np.zeros_like(mask)
        inner[(slice(2, -2),) * grid.dim] = True
        mask &= inner
    return mask


def rf_residual(prev, nxt, dt, grid):
    """``sup |(g_next - g_prev)/dt + 2 Ric((g_prev + g_next)/2)|`` (Frobenius per node)."""
    mid = 0.5 * (prev + nxt)
    res = (nxt - prev) / dt + 2.0 * ricci(mid, grid)
    norm = np.sqrt(np.sum(res ** 2, axis=(-1, -2)))
    return float(norm[residual_mask(grid)].max())


class GaugeTracker:
    """``on_step`` hook for :func:`ricci_deturck.hflow.run`.

    Advects the markers, and every ``residual_every`` steps reports the Ricci
    flow residual of the pulled-back metric. Also tracks the Jacobian floor.
    """

    def __init__(self, grid, sign=-1.0, residual_every=1, radius=None):
        self.diffeo = DiffeoField.identity(grid)
        self.sign = sign
        self.residual_every = residual_every
        self.radius = radius
        self.det_floor = 1.0
        self.drift_series = []
        self.residual_series = []
        self._count = 0

    def __call__(self, prev, new, dt):
        grid = self.diffeo.grid
        before = self.diffeo
        self.diffeo = advect(before, prev, new, self.sign)
        self._count += 1
        self.det_floor = min(self.det_floor, float(jacobian_det(self.diffeo).min()))
        out = {"sup_drift": drift_stats(self.diffeo)["sup_drift"]}
        self.drift_series.append((new.t, out["sup_drift"]))
        if self._count % self.residual_every == 0:
            r = rf_residual(pullback(before, prev.g), pullback(self.diffeo, new.g), dt, grid)
            self.residual_series.append((new.t, r))
            out["rf_residual"] = r
        return out
