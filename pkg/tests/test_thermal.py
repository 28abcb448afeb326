import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermion.thermal import (DomainError, RejectedCoupling, beta_uniformity, bose_b, classify_ir,
                              detailed_balance_defect, emission_weight, absorption_weight, example_coupling,
                              fd_derivatives, geometric_u_grid, glue, glued_derivatives, glued_norm_identity,
                              monomial_coupling, planck, planck_derivatives, power_coupling, rho_bounds_check,
                              smooth_glue_weight, uniform_u_grid, uv_cutoff)

mp.mp.dps = 40


def _rho_mp(beta, w):
    return 1 / (mp.exp(mp.mpf(beta) * mp.mpf(w)) - 1)


@given(st.floats(0.05, 20), st.floats(1e-9, 200))
@settings(max_examples=200)
def test_planck_against_mpmath(beta, w):
    ref = float(_rho_mp(beta, w))
    assert planck(beta, w) == pytest.approx(ref, rel=1e-13)


@given(st.floats(0.1, 10), st.floats(1e-3, 20))
@settings(max_examples=50)
def test_planck_derivatives_against_mpmath(beta, w):
    d = planck_derivatives(beta, np.array([w]))
    f = lambda x: _rho_mp(beta, x)
    for n in (1, 2, 3):
        ref = float(mp.diff(f, mp.mpf(w), n))
        assert float(d[n][0]) == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_planck_domain():
    with pytest.raises(DomainError):
        planck(1.0, 0.0)
    with pytest.raises(DomainError):
        planck(0.0, 1.0)
    assert planck(1.0, 600.0) > 0 and np.isfinite(planck(1.0, 1e-300))


@given(st.floats(0.05, 20))
def test_detailed_balance(beta):
    u = np.geomspace(1e-6, 40.0, 200) / beta
    assert detailed_balance_defect(beta, u) <= 1e-12


def test_rho_bounds_no_violations():
    rep = rho_bounds_check([0.1, 0.25, 1.0, 4.0, 10.0])
    assert rep["violations"] == []
    # d sqrt(rho) and d sqrt(1 + rho) bounded with a beta-independent constant
    assert max(rep["spread"].values()) < 0.05


@given(st.floats(-30, 30).filter(lambda v: abs(v) > 1e-3))
@settings(max_examples=100)
def test_bose_b_against_mpmath(x):
    got = bose_b(np.array([x]))
    f = lambda t: -t / mp.expm1(-t)
    for n in range(4):
        ref = float(mp.diff(f, mp.mpf(x), n))
        assert float(got[n][0]) == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_bose_b_at_zero():
    # B(x) = 1 + x/2 + x^2/12 - x^4/720 + ...
    got = [float(v[0]) for v in bose_b(np.array([0.0]))]
    assert got == pytest.approx([1.0, 0.5, 1.0 / 6.0, 0.0], abs=1e-15)


def test_bose_b_continuous_at_series_switch():
    x = np.array([0.5 - 1e-12, 0.5 + 1e-12, -0.5 - 1e-12, -0.5 + 1e-12])
    b = bose_b(x)
    for d in range(4):
        assert b[d][0] == pytest.approx(b[d][1], rel=1e-9)
        assert b[d][2] == pytest.approx(b[d][3], rel=1e-9)


def test_smooth_weight_matches_closed_weights():
    beta = 1.3
    u = np.array([0.01, 0.7, 3.0])
    E = emission_weight(beta, u)
    # power -1/2: the weight is u^{1/2} sqrt(1 + rho(u)), so one more u^{1/2} gives u sqrt(1 + rho)
    Wm = smooth_glue_weight(beta, u, -0.5)
    assert np.allclose(Wm[0] * np.sqrt(u), E[0], rtol=1e-12)
    Wp = smooth_glue_weight(beta, u, 0.5)
    assert np.allclose(Wp[0], u * Wm[0], rtol=1e-12)
    A = absorption_weight(beta, u)
    Wn = smooth_glue_weight(beta, -u, -0.5)
    assert np.allclose(Wn[0] * np.sqrt(u), A[0], rtol=1e-12)


def test_classify_ir():
    assert example_coupling().ir.kind == "sqrt_minus"
    m = monomial_coupling(3)
    assert m.ir.kind == "polynomial" and m.ir.power == 3
    assert classify_ir(lambda w: np.asarray(w) * np.exp(-np.asarray(w) ** 2)).kind == "rejected"
    assert classify_ir(lambda w: np.sqrt(np.asarray(w)) * np.exp(-np.asarray(w) ** 2)).kind == "sqrt_plus"
    assert power_coupling(3.0).ir.accepted


def test_rejected_coupling_raises():
    from thermion.thermal import make_coupling
    c = make_coupling("linear", lambda w: np.asarray(w, float) * np.exp(-np.asarray(w, float) ** 2))
    with pytest.raises(RejectedCoupling):
        glued_derivatives(c, 1.0, np.array([0.5]))


@pytest.mark.parametrize("beta", [0.25, 1.0, 4.0])
def test_glued_norm_identity(coupling, beta):
    grid = geometric_u_grid(uv_cutoff(coupling, beta))
    assert glued_norm_identity(coupling, beta, grid)["rel_diff"] < 1e-10


@pytest.mark.parametrize("maker", [example_coupling, lambda: monomial_coupling(3)])
def test_glued_derivative_against_differences(maker):
    c = maker()
    beta = 0.8
    u = np.array([-2.0, -0.4, -0.05, 0.05, 0.4, 2.0])
    d = glued_derivatives(c, beta, u, 1)
    h = 1e-6
    f = lambda v: glue(lambda w: c(w), beta, type("G", (), {"u": v})(), _sphere()).values[:, 0]
    fd = (f(u + h) - f(u - h)) / (2 * h)
    assert np.allclose(d[0], f(u), rtol=1e-12)
    assert np.allclose(d[1], fd, rtol=1e-6, atol=1e-8)


def _sphere():
    from thermion.quadrature import sphere_rule
    return sphere_rule(3)


def test_glue_detailed_balance_relation(coupling):
    # |tau f(-u)|^2 = e^{-beta u} |tau f(u)|^2
    beta = 1.7
    grid = uniform_u_grid(3.0, 10)
    g = glue(lambda w: coupling(w), beta, grid, _sphere())
    v = np.abs(g.values[:, 0]) ** 2
    n = len(v) // 2
    neg, pos = v[:n][::-1], v[n:]
    assert np.allclose(neg, np.exp(-beta * grid.u[n:]) * pos, rtol=1e-12)


def test_beta_uniformity_of_glued_norms(coupling):
    rep = beta_uniformity(coupling)
    assert all(s <= 0.25 for s in rep["spread"])


def test_fd_derivatives_on_sine():
    w = np.array([0.3, 1.1])
    d = fd_derivatives(np.sin, w)
    assert np.allclose(d[1], np.cos(w), atol=1e-7)
    assert np.allclose(d[2], -np.sin(w), atol=1e-5)
