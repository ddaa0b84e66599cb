# cython: language_level=3, boundscheck=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same contracts as ``_pykernels``; n (and dim) at most 4."""
cimport cython
import numpy as np

from libc.math cimport sqrt, fabs, hypot

from .errors import ConvergenceError, NonPositiveDefinite

NAME = "compiled"

cdef enum:
    MAXN = 4

JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 60


cdef int _cholesky_inverse(double G[MAXN][MAXN], double out[MAXN][MAXN], int n) noexcept nogil:
    """Inverse of an SPD matrix via Cholesky. Returns 1 when G is not positive definite."""
    cdef double L[MAXN][MAXN]
    cdef double Li[MAXN][MAXN]
    cdef int i, j, k
    cdef double s
    for i in range(n):
        for j in range(n):
            L[i][j] = 0.0
            Li[i][j] = 0.0
    for j in range(n):
        s = G[j][j]
        for k in range(j):
            s -= L[j][k] * L[j][k]
        if not (s > 0.0):
            return 1
        L[j][j] = sqrt(s)
        for i in range(j + 1, n):
            s = G[i][j]
            for k in range(j):
                s -= L[i][k] * L[j][k]
            L[i][j] = s / L[j][j]
    # forward substitution for L^{-1}
    for j in range(n):
        Li[j][j] = 1.0 / L[j][j]
        for i in range(j + 1, n):
            s = 0.0
            for k in range(j, i):
                s -= L[i][k] * Li[k][j]
            Li[i][j] = s / L[i][i]
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(j, n):
                s += Li[k][i] * Li[k][j]
            out[i][j] = s
            out[j][i] = s
    return 0


@cython.wraparound(False)
cdef int _rhs_flat(const double[:, :, ::1] P, const Py_ssize_t[::1] centers,
                   const Py_ssize_t[::1] pstride, const double[::1] h,
                   double[:, :, ::1] out) noexcept nogil:
    cdef Py_ssize_t node, c, sa, sb
    cdef int n = P.shape[1]
    cdef int dim = pstride.shape[0]
    cdef int a, b, i, j, p, q
    cdef double G[MAXN][MAXN]
    cdef double gi[MAXN][MAXN]
    cdef double D[MAXN][MAXN][MAXN]
    cdef double U[MAXN][MAXN][MAXN]
    cdef double Y[MAXN][MAXN][MAXN]
    cdef double Z[MAXN][MAXN][MAXN]
    cdef double W[MAXN][MAXN][MAXN]
    cdef double M[MAXN][MAXN][MAXN]
    cdef double t1[MAXN][MAXN]
    cdef double quad[MAXN][MAXN]
    cdef double Dt[MAXN][MAXN]
    cdef double hab, s, r

    for node in range(centers.shape[0]):
        c = centers[node]
        for i in range(n):
            for j in range(n):
                G[i][j] = P[c, i, j]
                t1[i][j] = 0.0
        if _cholesky_inverse(G, gi, n):
            return 1
        for a in range(dim):
            sa = pstride[a]
            for i in range(n):
                for j in range(n):
                    D[a][i][j] = (P[c + sa, i, j] - P[c - sa, i, j]) * (0.5 / h[a])
                    t1[i][j] += gi[a][a] * ((P[c + sa, i, j] - 2.0 * G[i][j] + P[c - sa, i, j])
                                            * (1.0 / (h[a] * h[a])))
            for b in range(a + 1, dim):
                sb = pstride[b]
                hab = 0.25 / (h[a] * h[b])
                for i in range(n):
                    for j in range(n):
                        t1[i][j] += (2.0 * gi[a][b]) * ((P[c + sa + sb, i, j] - P[c + sa - sb, i, j]
                                                        - P[c - sa + sb, i, j] + P[c - sa - sb, i, j]) * hab)

        # U[c]^{pa} = g^{pq} D[c]_{qb} g^{ba};  M[b]_{ip} = D[b]_{iq} g^{qp}
        for a in range(dim):
            for p in range(n):
                for j in range(n):
                    s = 0.0
                    r = 0.0
                    for q in range(n):
                        s += gi[p][q] * D[a][q][j]
                        r += D[a][p][q] * gi[q][j]
                    Z[a][p][j] = s          # scratch: g^{pq} D[a]_{qj}
                    M[a][p][j] = r
        for a in range(dim):
            for p in range(n):
                for b in range(n):
                    s = 0.0
                    for q in range(n):
                        s += Z[a][p][q] * gi[q][b]
                    U[a][p][b] = s
        # Y[a]_{jq} = D[a]_{jp} g^{pq} (== M);  Z[i]^{aq} = g^{ab} D[q]_{ib};  W[a]_{ip} = g^{ab} M[b]_{ip}
        for a in range(dim):
            for j in range(n):
                for q in range(n):
                    Y[a][j][q] = M[a][j][q]
        for i in range(n):
            for a in range(dim):
                for q in range(dim):
                    s = 0.0
                    for b in range(n):
                        s += gi[a][b] * D[q][i][b]
                    Z[i][a][q] = s
        for a in range(dim):
            for i in range(n):
                for p in range(n):
                    s = 0.0
                    for b in range(dim):
                        s += gi[a][b] * M[b][i][p]
                    W[a][i][p] = s

        for i in range(n):
            for j in range(n):
                s = 0.0
                for p in range(n):
                    for a in range(n):
                        s += D[i][p][a] * U[j][p][a]
                r = 0.0
                for a in range(dim):
                    for q in range(n):
                        r += Y[a][j][q] * Z[i][a][q]
                s += 2.0 * r
                r = 0.0
                for a in range(dim):
                    for p in range(n):
                        r += D[a][j][p] * W[a][i][p]
                s -= 2.0 * r
                quad[i][j] = s
                r = 0.0
                for q in range(n):
                    for b in range(dim):
                        r += U[j][q][b] * D[b][i][q]
                Dt[i][j] = r
        for i in range(n):
            for j in range(n):
                quad[i][j] -= 2.0 * (Dt[i][j] + Dt[j][i])
        for i in range(n):
            for j in range(n):
                out[node, i, j] = 0.5 * ((t1[i][j] + 0.5 * quad[i][j]) + (t1[j][i] + 0.5 * quad[j][i]))
    return 0


def hflow_rhs(padded, spacing):
    """Right-hand side of the h-flow at every node of a width-1 padded metric field."""
    padded = np.ascontiguousarray(padded, dtype=np.float64)
    n = padded.shape[-1]
    dim = padded.ndim - 2
    if n > MAXN or dim != n:
        raise ValueError(f"compiled kernel needs dim == n <= {MAXN}")
    pshape = padded.shape[:dim]
    shape = tuple(s - 2 for s in pshape)
    idx = np.indices(shape).reshape(dim, -1) + 1
    centers = np.ravel_multi_index(tuple(idx), pshape).astype(np.intp)
    pstride = np.array([int(np.prod(pshape[a + 1:])) for a in range(dim)], dtype=np.intp)
    h = np.asarray(spacing, dtype=np.float64)
    flat = padded.reshape((-1, n, n))
    out = np.empty((centers.shape[0], n, n))
    cdef int status
    cdef const double[:, :, ::1] Pv = flat
    cdef const Py_ssize_t[::1] cv = centers
    cdef const Py_ssize_t[::1] sv = pstride
    cdef const double[::1] hv = h
    cdef double[:, :, ::1] ov = out
    with nogil:
        status = _rhs_flat(Pv, cv, sv, hv, ov)
    if status:
        raise NonPositiveDefinite("metric is not positive definite at some node")
    return out.reshape(shape + (n, n))


@cython.wraparound(False)
cdef int _jacobi_one(double A[MAXN][MAXN], int n, double tol, int max_sweeps) noexcept nogil:
    cdef int sweep, p, q, k
    cdef double norm = 0.0
    cdef double off, apq, diff, sgn, t, c, s, xp, xq
    for p in range(n):
        for q in range(n):
            norm += A[p][q] * A[p][q]
    norm = sqrt(norm)
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(n):
                if p != q:
                    off += A[p][q] * A[p][q]
        if sqrt(off) <= tol * norm:
            return 0
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p][q]
                if apq == 0.0:
                    continue
                diff = A[q][q] - A[p][p]
                sgn = 1.0 if diff >= 0.0 else -1.0
                t = 2.0 * apq * sgn / (fabs(diff) + hypot(diff, 2.0 * apq))
                c = 1.0 / sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    xp = A[k][p]
                    xq = A[k][q]
                    A[k][p] = c * xp - s * xq
                    A[k][q] = s * xp + c * xq
                for k in range(n):
                    xp = A[p][k]
                    xq = A[q][k]
                    A[p][k] = c * xp - s * xq
                    A[q][k] = s * xp + c * xq
                A[p][q] = 0.0
                A[q][p] = 0.0
    return 1


def sym_eigvals(mats, tol=JACOBI_TOL, max_sweeps=JACOBI_MAX_SWEEPS):
    """Ascending eigenvalues of a stack of symmetric matrices by cyclic Jacobi rotations."""
    arr = np.asarray(mats, dtype=np.float64)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise ValueError(f"expected (..., n, n) symmetric matrices, got shape {arr.shape}")
    n = arr.shape[-1]
    if n > MAXN:
        from . import _pykernels
        return _pykernels.sym_eigvals(arr, tol, max_sweeps)
    lead = arr.shape[:-2]
    flat = np.ascontiguousarray(arr.reshape((-1, n, n)))
    out = np.empty((flat.shape[0], n))
    cdef const double[:, :, ::1] F = flat
    cdef double[:, ::1] O = out
    cdef double A[MAXN][MAXN]
    cdef double key
    cdef Py_ssize_t m
    cdef int i, j, bad = 0
    cdef int ni = n, ms = max_sweeps
    cdef double tl = tol
    with nogil:
        for m in range(F.shape[0]):
            for i in range(ni):
                for j in range(ni):
                    A[i][j] = 0.5 * (F[m, i, j] + F[m, j, i])
            if _jacobi_one(A, ni, tl, ms):
                bad = 1
                break
            # stable insertion sort of the diagonal
            for i in range(ni):
                key = A[i][i]
                j = i - 1
                while j >= 0 and O[m, j] > key:
                    O[m, j + 1] = O[m, j]
                    j -= 1
                O[m, j + 1] = key
    if bad:
        raise ConvergenceError(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return out.reshape(lead + (n,))
