"""Pure numpy kernels: the fallback used when the compiled extension is absent.

Both kernels here have a line-for-line counterpart in ``_ckernels.pyx``; the
two must agree to roundoff (see tests/test_kernels.py).
"""
import numpy as np

from .errors import ConvergenceError, NonPositiveDefinite

NAME = "python"

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 60


def _shift(padded, dim, offsets):
    """View of a width-1 padded array shifted by ``offsets`` (one int per axis)."""
    idx = []
    for a in range(dim):
        n = padded.shape[a] - 2
        idx.append(slice(1 + offsets[a], 1 + offsets[a] + n))
    return padded[tuple(idx)]


def hflow_rhs(padded, spacing):
    """Right-hand side of the h-flow at every node of a width-1 padded metric field.

    ``padded`` has shape ``(*shape + 2, n, n)``. Returns ``(*shape, n, n)``.
    """
    padded = np.asarray(padded, dtype=float)
    n = padded.shape[-1]
    dim = padded.ndim - 2
    zero = (0,) * dim
    g = _shift(padded, dim, zero)

    D = []  # D[c][..., i, j] = d_c g_ij
    hess = {}
    for a in range(dim):
        e = [0] * dim
        e[a] = 1
        ep = _shift(padded, dim, e)
        e[a] = -1
        em = _shift(padded, dim, e)
        D.append((ep - em) * (0.5 / spacing[a]))
        hess[a, a] = (ep - 2.0 * g + em) * (1.0 / spacing[a] ** 2)
        for b in range(a + 1, dim):
            def corner(sa, sb):
                o = [0] * dim
                o[a], o[b] = sa, sb
                return _shift(padded, dim, o)

            hess[a, b] = (corner(1, 1) - corner(1, -1) - corner(-1, 1) + corner(-1, -1)) * (
                0.25 / (spacing[a] * spacing[b])
            )
    D = np.stack(D, axis=-3)  # (..., c, i, j)

    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite("metric is not positive definite at some node") from None
    ginv = np.linalg.inv(g)
    ginv = 0.5 * (ginv + np.swapaxes(ginv, -1, -2))

    t1 = np.zeros_like(g)
    for a in range(dim):
        t1 += ginv[..., a, a, None, None] * hess[a, a]
        for b in range(a + 1, dim):
            t1 += (2.0 * ginv[..., a, b])[..., None, None] * hess[a, b]

    # U[c]^{pa} = g^{pq} d_c g_qb g^{ba}: the matrix d_c g with both indices raised
    U = np.einsum("...pq,...cqb,...ba->...cpa", ginv, D, ginv, optimize=True)
    quad = np.einsum("...ipa,...jpa->...ij", D, U, optimize=True)
    # 2 g^ab g^pq d_a g_jp d_q g_ib
    Y = np.einsum("...ajp,...pq->...ajq", D, ginv, optimize=True)
    Z = np.einsum("...ab,...qib->...iaq", ginv, D, optimize=True)
    quad += 2.0 * np.einsum("...ajq,...iaq->...ij", Y, Z, optimize=True)
    # -2 g^ab g^pq d_a g_jp d_b g_iq
    W = np.einsum("...ab,...bip->...aip", ginv, D @ ginv[..., None, :, :], optimize=True)
    quad -= 2.0 * np.einsum("...ajp,...aip->...ij", D, W, optimize=True)
    # -2 g^ab g^pq d_j g_pa d_b g_iq  and its (i, j) mirror
    Dt = np.einsum("...jqb,...biq->...ij", U, D, optimize=True)
    quad -= 2.0 * (Dt + np.swapaxes(Dt, -1, -2))

    rhs = t1 + 0.5 * quad
    return 0.5 * (rhs + np.swapaxes(rhs, -1, -2))


def sym_eigvals(mats, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Ascending eigenvalues of a stack of symmetric matrices by cyclic Jacobi rotations."""
    A = np.array(mats, dtype=float, copy=True)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected (..., n, n) symmetric matrices, got shape {A.shape}")
    lead = A.shape[:-2]
    n = A.shape[-1]
    A = A.reshape((-1, n, n))
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    norm = np.sqrt(np.einsum("kij,kij->k", A, A))
    offmask = ~np.eye(n, dtype=bool)

    for _ in range(max_sweeps + 1):
        off = np.sqrt(np.sum(A[:, offmask] ** 2, axis=1))
        if np.all(off <= tol * norm):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[:, p, q]
                diff = A[:, q, q] - A[:, p, p]
                sgn = np.where(diff >= 0.0, 1.0, -1.0)
                den = np.abs(diff) + np.hypot(diff, 2.0 * apq)
                with np.errstate(invalid="ignore", divide="ignore"):
                    t = np.where(apq != 0.0, 2.0 * apq * sgn / den, 0.0)
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                cc = c[:, None]
                ss = s[:, None]
                colp = A[:, :, p].copy()
                colq = A[:, :, q].copy()
                A[:, :, p] = cc * colp - ss * colq
                A[:, :, q] = ss * colp + cc * colq
                rowp = A[:, p, :].copy()
                rowq = A[:, q, :].copy()
                A[:, p, :] = cc * rowp - ss * rowq
                A[:, q, :] = ss * rowp + cc * rowq
                A[:, p, q] = 0.0
                A[:, q, p] = 0.0
    else:
        raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    lam = np.sort(np.diagonal(A, axis1=1, axis2=2), axis=1, kind="stable")
    return lam.reshape(lead + (n,))
