import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ricci_deturck import Boundary, OutsideDomain, make_grid
from ricci_deturck.grid import (
    diff1,
    diff2,
    gradient,
    interpolate,
    interpolation_weights,
    pad,
    sym_eigenvalues,
)


# -- construction ---------------------------------------------------------

def test_periodic_grid_wraps():
    gr = make_grid(2, [16, 16], 0.1, "periodic")
    assert gr.n_nodes == 256
    assert gr.neighbor((15, 3), 0, 1) == (0, 3)
    assert gr.neighbor((0, 3), 1, -4) == (0, 15)


def test_dirichlet_ghost_is_identity():
    gr = make_grid(3, [8, 8, 8], 0.25, "dirichlet-to-h")
    assert gr.boundary is Boundary.DIRICHLET
    g = gr.identity_field() * 2.0
    P = pad(g, gr)
    assert P.shape == (10, 10, 10, 3, 3)
    np.testing.assert_array_equal(P[0, 4, 4], np.eye(3))
    np.testing.assert_array_equal(P[9, 9, 9], np.eye(3))
    assert gr.neighbor((7, 0, 0), 0, 1) is None


@pytest.mark.parametrize("args", [
    (5, 16, 0.1), (1, 16, 0.1), (2, 7, 0.1), (2, 16, 0.0), (2, 16, -1.0), (2, [16, 16, 16], 0.1),
])
def test_make_grid_rejects(args):
    with pytest.raises(ValueError):
        make_grid(*args)


def test_refined_keeps_domain():
    for bnd in ("periodic", "dirichlet"):
        gr = make_grid(2, 9, 0.5, bnd)
        fine = gr.refined(2)
        np.testing.assert_allclose(fine.periods, gr.periods)


def test_axis_errors():
    gr = make_grid(2, 8, 0.1)
    f = np.zeros(gr.shape)
    with pytest.raises(IndexError):
        diff1(f, gr, 2)
    with pytest.raises(IndexError):
        diff2(f, gr, 0, -1)


# -- stencils -------------------------------------------------------------

def test_diff1_linear_and_quadratic():
    gr = make_grid(2, 16, 0.1, "dirichlet")
    x = gr.coords()
    lin = 3.0 * x[..., 0]
    d = diff1(lin, gr, 0, ghost=lambda X: 3.0 * X[..., 0])
    np.testing.assert_allclose(d, 3.0, rtol=0, atol=1e-12)
    quad = x[..., 0] ** 2
    d = diff1(quad, gr, 0, ghost=lambda X: X[..., 0] ** 2)
    np.testing.assert_allclose(d, 2.0 * x[..., 0], rtol=0, atol=1e-12)


def _sin_error(N):
    gr = make_grid(2, N, 2 * np.pi / N)
    f = np.sin(gr.coords()[..., 0])
    return abs(diff1(f, gr, 0, node=(0, 0)) - 1.0)


def test_diff1_richardson():
    assert _sin_error(16) / _sin_error(32) >= 3.9


def test_diff2_examples():
    gr = make_grid(2, 12, 0.3, "periodic")
    np.testing.assert_array_equal(diff2(np.full(gr.shape, 2.5), gr, 0, 1), 0.0)
    gd = make_grid(2, 12, 0.3, "dirichlet")
    x = gd.coords()
    f = x[..., 0] * x[..., 1]
    d = diff2(f, gd, 0, 1, ghost=lambda X: X[..., 0] * X[..., 1])
    np.testing.assert_allclose(d, 1.0, rtol=0, atol=1e-12)


def test_diff2_richardson():
    errs = []
    for N in (16, 32):
        gr = make_grid(2, N, 2 * np.pi / N)
        f = np.cos(gr.coords()[..., 1])
        errs.append(np.abs(diff2(f, gr, 1, 1) + f).max())
    assert errs[0] / errs[1] >= 3.9


poly_coef = arrays(np.float64, 10, elements=st.floats(-2, 2))


def _poly(c, X):
    x, y, z = X[..., 0], X[..., 1], X[..., 2]
    return (c[0] + c[1] * x + c[2] * y + c[3] * z + c[4] * x * x + c[5] * y * y
            + c[6] * z * z + c[7] * x * y + c[8] * y * z + c[9] * x * z)


@given(poly_coef, st.sampled_from(["periodic", "dirichlet"]), st.integers(0, 2), st.integers(0, 2))
def test_stencils_exact_on_quadratics(c, bnd, a, b):
    gr = make_grid(3, 8, (0.3, 0.2, 0.25), bnd)
    X = gr.coords()
    f = _poly(c, X)
    ghost = lambda Y: _poly(c, Y)  # noqa: E731
    if bnd == "periodic":
        # a polynomial is not periodic; compare only away from the seam
        inner = (slice(1, -1),) * 3
    else:
        inner = (slice(None),) * 3
    grad_exact = [c[1] + 2 * c[4] * X[..., 0] + c[7] * X[..., 1] + c[9] * X[..., 2],
                  c[2] + 2 * c[5] * X[..., 1] + c[7] * X[..., 0] + c[8] * X[..., 2],
                  c[3] + 2 * c[6] * X[..., 2] + c[8] * X[..., 1] + c[9] * X[..., 0]]
    H = np.array([[2 * c[4], c[7], c[9]], [c[7], 2 * c[5], c[8]], [c[9], c[8], 2 * c[6]]])
    d1 = diff1(f, gr, a, ghost=ghost if bnd == "dirichlet" else None)
    d2 = diff2(f, gr, a, b, ghost=ghost if bnd == "dirichlet" else None)
    np.testing.assert_allclose(d1[inner], grad_exact[a][inner], atol=1e-11)
    np.testing.assert_allclose(d2[inner], H[a, b], atol=1e-10)


@given(arrays(np.float64, (8, 9), elements=st.floats(-1e3, 1e3)), st.integers(0, 1))
def test_periodic_derivative_telescopes(f, axis):
    gr = make_grid(2, (8, 9), (0.1, 0.7))
    s = diff1(f, gr, axis).sum()
    assert abs(s) <= 1e-12 * (1 + np.abs(f).sum() / 0.1)


def test_gradient_shape():
    gr = make_grid(3, 8, 0.2)
    g = gr.identity_field()
    assert gradient(g, gr).shape == (8, 8, 8, 3, 3, 3)


# -- eigenvalues ----------------------------------------------------------

def test_eigen_examples():
    np.testing.assert_array_equal(sym_eigenvalues(np.eye(3)), [1, 1, 1])
    np.testing.assert_allclose(sym_eigenvalues(np.diag([2.0, 0.5])), [0.5, 2.0], rtol=1e-15)


def test_eigen_charpoly_oracle():
    A = np.array([[0.7, -0.3, 0.25], [-0.3, 1.9, 0.4], [0.25, 0.4, -0.6]])
    # roots of det(A - x I) by 50-digit bisection
    roots = [-0.7239145562747883332, 0.70961823275124000174, 2.0142963235235483315]
    np.testing.assert_allclose(sym_eigenvalues(A), roots, rtol=0, atol=1e-10)


def test_eigen_ties_sorted():
    lam = sym_eigenvalues(np.diag([3.0, 1.0, 3.0, 1.0]))
    np.testing.assert_array_equal(lam, [1.0, 1.0, 3.0, 3.0])


sym_mats = st.integers(2, 4).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-3, 3)).map(lambda A: A + A.T)
)


@given(sym_mats)
def test_eigen_trace_det(S):
    lam = sym_eigenvalues(S)
    assert np.all(np.diff(lam) >= 0)
    assert abs(lam.sum() - np.trace(S)) <= 1e-12 * max(1.0, np.abs(S).sum())
    assert abs(np.prod(lam) - np.linalg.det(S)) <= 1e-10 * max(1.0, np.abs(S).max()) ** S.shape[0]


# -- interpolation --------------------------------------------------------

def test_interpolate_node_and_linear():
    gr = make_grid(2, 10, (0.1, 0.2), "dirichlet")
    X = gr.coords()
    f = X[..., 0] + 2.0 * X[..., 1]
    assert interpolate(f, gr, X[3, 4]) == f[3, 4]
    mid = X[3, 4] + 0.5 * np.asarray(gr.spacing)
    assert abs(interpolate(f, gr, mid) - (mid[0] + 2.0 * mid[1])) <= 1e-14


def test_interpolate_quadratic_error():
    gr = make_grid(2, 10, 0.1, "dirichlet")
    X = gr.coords()
    f = X[..., 0] ** 2
    centre = X[2, 2] + 0.05
    err = abs(interpolate(f, gr, centre) - centre[0] ** 2)
    assert err <= 0.1 ** 2 / 4 + 1e-15


def test_interpolate_periodic_wrap_and_dirichlet_error():
    gr = make_grid(2, 8, 0.5)
    f = np.arange(64.0).reshape(8, 8)
    assert interpolate(f, gr, [4.0 + 0.0, 0.5]) == interpolate(f, gr, [0.0, 0.5])
    gd = make_grid(2, 8, 0.5, "dirichlet")
    with pytest.raises(OutsideDomain):
        interpolate(f, gd, [3.6, 1.0])


@given(st.floats(0, 3.999), st.floats(-10, 10))
def test_interpolation_weights_convex(x, y):
    gr = make_grid(2, 8, 0.5)
    w = interpolation_weights(gr, [x, y])
    ws = np.array([v for _, v in w])
    assert np.all(ws >= 0)
    assert abs(ws.sum() - 1.0) <= 1e-14


@given(arrays(np.float64, (8, 8), elements=st.floats(-5, 5)), st.integers(0, 63), st.floats(0, 1))
def test_interpolate_monotone_in_nodal_values(f, k, bump):
    gr = make_grid(2, 8, 0.5)
    pos = np.array([[1.3, 2.2], [3.9, 0.1]])
    g = f.copy()
    g.flat[k] += bump
    assert np.all(interpolate(g, gr, pos) >= interpolate(f, gr, pos) - 1e-14)
