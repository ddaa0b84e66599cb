import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ricci_deturck import NonPositiveDefinite, make_grid
from ricci_deturck.geometry import (
    christoffel,
    deturck_vector,
    inverse_metric,
    lie_term,
    ricci,
    rhs_ricci_deturck,
)
from ricci_deturck.hflow import hflow_rhs
from ricci_deturck.initial import constant, sinusoid


def test_inverse_examples(rng):
    np.testing.assert_array_equal(inverse_metric(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(inverse_metric(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]), rtol=1e-15)
    A = rng.normal(size=(3, 3))
    g = A @ A.T + 0.5 * np.eye(3)
    np.testing.assert_allclose(g @ inverse_metric(g), np.eye(3), atol=1e-12)


def test_inverse_rejects():
    with pytest.raises(NonPositiveDefinite):
        inverse_metric(np.diag([1.0, 1e-11]))
    with pytest.raises(NonPositiveDefinite):
        inverse_metric(np.diag([1.0, -2.0]))


def _conformal(gr, f):
    return np.exp(2.0 * f)[..., None, None] * np.eye(2)


def test_christoffel_conformal_closed_form():
    # g = exp(2f) delta, f = 0.1 x1: Gamma^1_11 = 0.1, Gamma^1_22 = -0.1, Gamma^2_12 = 0.1
    gr = make_grid(2, 16, 0.1, "dirichlet")
    X = gr.coords()
    f = 0.1 * X[..., 0]
    G = christoffel(_conformal(gr, f), gr, node=(8, 8))
    h2 = 0.1 ** 2
    assert abs(G[0, 0, 0] - 0.1) <= 0.1 * h2
    assert abs(G[0, 1, 1] + 0.1) <= 0.1 * h2
    assert abs(G[1, 0, 1] - 0.1) <= 0.1 * h2
    assert G[1, 0, 1] == G[1, 1, 0]


@given(st.integers(0, 1000))
def test_christoffel_symmetric(seed):
    gr = make_grid(3, 8, 0.3)
    G = christoffel(sinusoid(gr, 0.2, seed), gr)
    np.testing.assert_array_equal(G, np.swapaxes(G, -1, -2))


@pytest.mark.parametrize("bnd", ["periodic", "dirichlet"])
def test_flat_fields_have_no_curvature(bnd):
    gr = make_grid(3, 8, 0.25, bnd)
    if bnd == "periodic":
        g = constant(gr, 0.3, seed=2)
    else:
        g = gr.identity_field()
    assert np.abs(ricci(g, gr)).max() <= 1e-10
    assert np.abs(deturck_vector(g, gr)).max() == 0.0
    assert np.abs(rhs_ricci_deturck(g, gr)).max() <= 1e-10


def _ricci_conformal_error(N):
    # 2D: Ric = -(Lap f) delta; f = 0.1 sin x1 cos x2 gives Lap f = -2 f
    gr = make_grid(2, N, 2 * np.pi / N)
    X = gr.coords()
    f = 0.1 * np.sin(X[..., 0]) * np.cos(X[..., 1])
    R = ricci(_conformal(gr, f), gr)
    return np.abs(R - (2.0 * f)[..., None, None] * np.eye(2)).max()


def test_ricci_conformal_formula():
    e1, e2 = _ricci_conformal_error(16), _ricci_conformal_error(32)
    assert e2 <= 0.1 * (2 * np.pi / 32) ** 2
    assert e1 / e2 >= 3.5


def test_ricci_linear_scaling():
    gr = make_grid(2, 16, 2 * np.pi / 16)
    base = sinusoid(gr, 0.02, seed=5)
    r1 = np.abs(ricci(base, gr)).max()
    half = sinusoid(gr, np.sqrt(1.02) - 1.0, seed=5)  # log g halved
    r2 = np.abs(ricci(half, gr)).max()
    R = ricci(base, gr)
    np.testing.assert_array_equal(R, np.swapaxes(R, -1, -2))
    assert 1.8 <= r1 / r2 <= 2.2


def test_deturck_vector_conformal_2d_vanishes():
    gr = make_grid(2, 16, 0.1, "dirichlet")
    f = 0.1 * gr.coords()[..., 0]
    V = deturck_vector(_conformal(gr, f), gr)
    assert np.abs(V[gr.interior_mask()]).max() <= 1e-13


def test_deturck_covariant_contraction(rng):
    gr = make_grid(3, 8, 0.3)
    g = sinusoid(gr, 0.1, seed=3)
    V = deturck_vector(g, gr)
    Vl = deturck_vector(g, gr, covariant=True)
    np.testing.assert_allclose(Vl, np.einsum("...ik,...k->...i", g, V), atol=1e-12)
    node = (1, 2, 3)
    np.testing.assert_array_equal(deturck_vector(g, gr, node=node), V[node])


def test_rhs_oracle_symmetric_and_agrees():
    errs = []
    for N in (16, 32):
        gr = make_grid(2, N, 2 * np.pi / N)
        g = sinusoid(gr, 0.05, seed=8)
        o = rhs_ricci_deturck(g, gr)
        np.testing.assert_array_equal(o, np.swapaxes(o, -1, -2))
        errs.append(np.abs(o - hflow_rhs(g, gr)).max())
    h = 2 * np.pi / 32
    assert errs[1] <= 0.1 * h * h
    assert errs[0] / errs[1] >= 3.5


def _perm_symmetric_field(gr, eps, seed):
    """A 2D field with g(x2, x1) = S g(x1, x2) S for the swap S."""
    g = sinusoid(gr, eps, seed)
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    gs = np.einsum("ab,xybc,cd->yxad", S, g, S)
    return 0.5 * (g + gs)


def test_ricci_equivariant_under_axis_swap():
    gr = make_grid(2, 16, 2 * np.pi / 16)
    g = _perm_symmetric_field(gr, 0.1, 4)
    S = np.array([[0.0, 1.0], [1.0, 0.0]])
    R = ricci(g, gr)
    Rs = np.einsum("ab,xybc,cd->yxad", S, R, S)
    np.testing.assert_allclose(Rs, R, rtol=0, atol=1e-13)
    L = lie_term(g, gr)
    np.testing.assert_allclose(np.einsum("ab,xybc,cd->yxad", S, L, S), L, rtol=0, atol=1e-13)


@given(arrays(np.float64, (3,), elements=st.floats(-0.4, 0.4)), st.floats(0.5, 2.0))
def test_constant_field_is_flat(diag, scale):
    gr = make_grid(2, 8, 0.5)
    g0 = scale * np.array([[np.exp(diag[0]), diag[2]], [diag[2], np.exp(diag[1])]])
    g = np.broadcast_to(g0, gr.shape + (2, 2)).copy()
    assert np.all(deturck_vector(g, gr) == 0.0)
    assert np.all(ricci(g, gr) == 0.0)
