import numpy as np
import pytest
from hypothesis import given, strategies as st

from ricci_deturck import make_grid
from ricci_deturck.conformal2d import (
    ConformalField,
    conformal_dt,
    conformal_monotone,
    conformal_rhs,
    run_conformal,
    step_conformal,
)
from ricci_deturck.initial import conformal


def test_rhs_constant_zero():
    gr = make_grid(2, 16, 0.3)
    assert np.all(conformal_rhs(np.full(gr.shape, 0.7), gr) == 0.0)


def test_rhs_small_sinusoid():
    errs = []
    for N in (32, 64):
        gr = make_grid(2, N, 2 * np.pi / N)
        a = 1e-3
        u = a * np.sin(gr.coords()[..., 0])
        exact = -u * np.exp(-u)
        errs.append(np.abs(conformal_rhs(u, gr) - exact).max())
        assert errs[-1] <= a * (gr.spacing[0] ** 2 + a)


def test_rhs_sign_at_maximum():
    gr = make_grid(2, 16, 0.3, "dirichlet")
    X = gr.coords() - gr.center
    u = 0.8 - np.sum(X ** 2, axis=-1)
    k = np.unravel_index(np.argmax(u), u.shape)
    assert conformal_rhs(u, gr, node=k) <= 0.0


def test_zero_is_fixed():
    gr = make_grid(2, 16, 0.3)
    f = ConformalField(gr, np.zeros(gr.shape))
    np.testing.assert_array_equal(step_conformal(f, conformal_dt(f)).u, 0.0)


@given(st.integers(0, 10 ** 6), st.sampled_from(["periodic", "dirichlet"]), st.sampled_from(["rough", "sinusoid"]))
def test_maximum_principle_per_step(seed, bnd, gen):
    gr = make_grid(2, 16, 0.4, bnd)
    f = ConformalField(gr, conformal(gen, gr, 1.0, seed))
    for _ in range(10):
        nxt = step_conformal(f, conformal_dt(f))
        assert np.abs(nxt.u).max() <= np.abs(f.u).max() + 1e-12
        f = nxt


def test_small_sinusoid_heat_rate():
    a = 1e-4
    gr = make_grid(2, 64, 2 * np.pi / 64)
    u0 = a * np.sin(gr.coords()[..., 0])
    f, _ = run_conformal(u0, gr, 0.3)
    ratio = np.abs(f.u).max() / (a * np.exp(-0.3))
    assert abs(ratio - 1.0) <= 2e-3


def test_monotone_examples():
    gr = make_grid(2, 8, 0.1)
    assert conformal_monotone(np.zeros(gr.shape), gr, 2, 0.0) == (0.0, 0.0)
    u = np.zeros(gr.shape)
    u[2, 2] = 2.0
    pos, neg = conformal_monotone(u, gr, 2, 1.0)
    assert pos == pytest.approx(0.005, rel=1e-14) and neg == 0.0
    pos, neg = conformal_monotone(-u, gr, 2, 1.0)
    assert neg == pytest.approx(0.005, rel=1e-14) and pos == 0.0


def test_monotone_integrals_along_run():
    gr = make_grid(2, 32, 2 * np.pi / 32)
    u0 = conformal("sinusoid", gr, 1.0, 3)
    _, recs = run_conformal(u0, gr, 1.0, p=2)
    for attr in ("monotone_pos", "monotone_neg"):
        v = np.array([getattr(r, attr) for r in recs])
        assert np.all(np.diff(v) <= 1e-8 * (1 + v[0]))


def test_periodic_normalisation_conserves_mass():
    gr = make_grid(2, 32, 2 * np.pi / 32)
    u0 = conformal("bump", gr, 1.0, 0)
    assert np.abs(u0).max() == pytest.approx(1.0, rel=1e-14)
    assert np.mean(np.exp(u0)) == pytest.approx(1.0, abs=1e-10)
    f, _ = run_conformal(u0, gr, 0.5)
    assert np.mean(np.exp(f.u)) == pytest.approx(np.mean(np.exp(u0)), abs=1e-6)


def test_dirichlet_boundary_zero():
    gr = make_grid(2, 16, 0.3, "dirichlet")
    f, _ = run_conformal(conformal("rough", gr, 1.0, 1), gr, 0.1)
    assert np.all(f.u[gr.boundary_mask()] == 0.0)


def test_rejects_non_2d():
    with pytest.raises(ValueError):
        conformal_rhs(np.zeros((8, 8, 8)), make_grid(3, 8, 0.1))
