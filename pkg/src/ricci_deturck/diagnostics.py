"""Monitored functionals of a metric field and decay-rate regression.

For a metric with eigenvalues ``lam`` relative to the identity:

    phi_m = sum lam^-m,   psi_m = sum lam^m,
    Phi   = phi_m + psi_m - 2n = sum lam^-m (lam^m - 1)^2 >= 0,
    I     = (1/p) * sum_nodes (Phi - delta)_+^p * cell_volume.

``Phi`` is evaluated in the second form with ``expm1`` so it keeps full
relative precision near the identity.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, NonPositiveDefinite
from .grid import Boundary, gradient, hessian, sym_eigenvalues


def _eig(g):
    lam = sym_eigenvalues(np.asarray(g, dtype=float))
    if np.any(lam[..., 0] <= 0.0):
        raise NonPositiveDefinite(f"non-positive eigenvalue {lam[..., 0].min():.3e}")
    return lam


def phi_psi(g, m):
    """``(phi_m, psi_m)`` for one metric or a stack."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    lam = _eig(g)
    return np.sum(lam ** -m, axis=-1), np.sum(lam ** m, axis=-1)


def phi_excess(g, m):
    """``Phi = phi_m + psi_m - 2n``, computed without cancellation."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    e = np.expm1(m * np.log(_eig(g)))
    return np.sum(e * e / (1.0 + e), axis=-1)


def closeness_epsilon(g):
    """Smallest eps with ``1/(1+eps) <= lam <= 1+eps`` at every node."""
    lam = _eig(g)
    eps = np.maximum(lam[..., -1] - 1.0, 1.0 / lam[..., 0] - 1.0)
    return float(max(eps.max(), 0.0))


def sup_deviation(g):
    """``sup_x max_i |lam_i - 1|``."""
    return float(np.abs(_eig(g) - 1.0).max())


def integral_from_phi(phi, cell_volume, p=1, delta=0.0):
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    excess = np.maximum(np.asarray(phi) - delta, 0.0)
    return float(np.sum(excess ** p) * cell_volume / p)


def integral_I(g, grid, m=6, p=1, delta=0.0):
    """Midpoint quadrature of ``(1/p) (Phi - delta)_+^p`` over all nodes."""
    return integral_from_phi(phi_excess(g, m), grid.cell_volume, p, delta)


def sup_grad_norms(g, grid, max_order=2):
    """``[sup|dg|, sup|d^2 g|]`` (Frobenius over all partials) over interior nodes."""
    if not 1 <= max_order <= 2:
        raise ValueError("max_order must be 1 or 2")
    mask = grid.interior_mask()
    d = grid.dim
    out = []
    dg = gradient(g, grid)
    out.append(float(np.sqrt(np.sum(dg ** 2, axis=(d, d + 1, d + 2)))[mask].max()))
    if max_order >= 2:
        hg = hessian(g, grid)
        out.append(float(np.sqrt(np.sum(hg ** 2, axis=(d, d + 1, d + 2, d + 3)))[mask].max()))
    return out


@dataclass
class DiagnosticsRecord:
    t: float
    eps: float
    sup_dev: float
    max_phi: float
    integral_I: float
    grad_norms: tuple
    params: tuple
    sup_drift: float | None = None
    rf_residual: float | None = None
    extra: dict = field(default_factory=dict)


def record(state, m=6, p=1, delta=0.0, sup_drift=None, rf_residual=None, **extra):
    g = state.g
    grid = state.grid
    lam = _eig(g)
    eps = float(max(np.maximum(lam[..., -1] - 1.0, 1.0 / lam[..., 0] - 1.0).max(), 0.0))
    e = np.expm1(m * np.log(lam))
    phi = np.sum(e * e / (1.0 + e), axis=-1)
    return DiagnosticsRecord(
        t=state.t,
        eps=eps,
        sup_dev=float(np.abs(lam - 1.0).max()),
        max_phi=float(phi.max()),
        integral_I=integral_from_phi(phi, grid.cell_volume, p, delta),
        grad_norms=tuple(sup_grad_norms(g, grid, 2)),
        params=(m, p, delta),
        sup_drift=sup_drift,
        rf_residual=rf_residual,
        extra=extra,
    )


@dataclass
class DissipationReport:
    max_violation: float
    margin: float | None


def dissipation_check(state, m=6, dt=None, floor=1e-10):
    """Audit ``dPhi/dt <= g^ab d_a d_b Phi`` with a one-step difference of the flow.

    ``max_violation`` is the largest positive part of ``dPhi/dt - g^ab d_ab Phi``
    over interior nodes. ``margin`` is the smallest
    ``-(dPhi/dt - g^ab d_ab Phi) / |dg|^2`` over nodes where ``|dg|^2 > floor``,
    or ``None`` when no node qualifies.
    """
    from .hflow import cfl_dt, step

    grid = state.grid
    if dt is None:
        dt = cfl_dt(state, 0.05)
    phi0 = phi_excess(state.g, m)
    phi1 = phi_excess(step(state, dt).g, m)
    dphi = (phi1 - phi0) / dt
    ginv = np.linalg.inv(state.g)
    d = grid.dim
    hphi = hessian(phi0, grid, ghost=0.0)
    lphi = np.einsum("...ab,...ab->...", ginv, hphi)
    defect = dphi - lphi
    mask = grid.interior_mask()
    viol = float(max(np.max(defect[mask]), 0.0))
    dg2 = np.sum(gradient(state.g, grid) ** 2, axis=(d, d + 1, d + 2))
    use = mask & (dg2 > floor)
    margin = float(np.min(-defect[use] / dg2[use])) if np.any(use) else None
    return DissipationReport(viol, margin)


@dataclass
class FitResult:
    exponent: float
    window: tuple
    residual: float
    reference_exponents: tuple
    intercept: float = 0.0
    n_samples: int = 0


def reference_exponents(dim, p):
    """The two reference decay rates ``n/(2(2p+n))`` and ``n/(4p)``."""
    return dim / (2.0 * (2.0 * p + dim)), dim / (4.0 * p)


def fit_decay(series, window=None, dim=3, p=1, min_samples=8):
    """Least-squares slope of ``log sup_dev`` against ``log t``.

    ``series`` is an iterable of ``(t, sup_dev)``; ``window`` defaults to
    ``[0.1 T, T]`` with ``T`` the last time.
    """
    arr = np.asarray([(float(t), float(v)) for t, v in series], dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise InsufficientData("empty series")
    t, v = arr[:, 0], arr[:, 1]
    if window is None:
        T = t.max()
        window = (0.1 * T, T)
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"empty window [{lo}, {hi}]")
    sel = (t >= lo) & (t <= hi) & (t > 0) & (v > 1e-12)
    if sel.sum() < min_samples:
        raise InsufficientData(f"{int(sel.sum())} usable samples in [{lo}, {hi}], need {min_samples}")
    x, y = np.log(t[sel]), np.log(v[sel])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return FitResult(float(coef[0]), (lo, hi), resid, reference_exponents(dim, p),
                     float(coef[1]), int(sel.sum()))


def loglog_slope(t, values):
    """Fitted slope of ``log values`` against ``log t``; the trend of an envelope."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    return float(np.polyfit(np.log(t), np.log(v), 1)[0])


def running_envelope(values):
    """Tightest non-increasing upper bound: ``E_k = max_{j >= k} v_j``."""
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def first_time_below(times, values, level):
    """First recorded time at which ``values`` drops to ``level`` or below (``None`` if never)."""
    for t, v in zip(times, values):
        if v <= level:
            return float(t)
    return None


def boundary_phi_is_zero(g, grid, m=6):
    """Sanity check used on Dirichlet runs: Phi vanishes on the boundary ring."""
    if grid.boundary is not Boundary.DIRICHLET:
        return True
    return bool(np.all(phi_excess(g, m)[grid.boundary_mask()] == 0.0))
