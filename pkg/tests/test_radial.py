import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import eval_legendre, spherical_jn, spherical_yn

from thermion.radial import RadialSolver, legendre_table, spherical_jn_table, spherical_yn_table


@given(st.floats(1e-3, 200.0))
@settings(max_examples=60)
def test_jn_table_matches_scipy(z):
    L = 40
    got = spherical_jn_table(L, np.array([z]))[:, 0]
    ref = spherical_jn(np.arange(L + 1), z)
    scale = np.maximum(np.abs(ref), 1e-300)
    big = np.abs(ref) > 1e-250
    assert np.all(np.abs(got - ref)[big] <= 1e-10 * np.maximum(scale[big], 1e-3 * np.max(np.abs(ref))))


def test_jn_table_at_zero():
    t = spherical_jn_table(5, np.array([0.0, 1.0]))
    assert t[0, 0] == 1.0 and np.all(t[1:, 0] == 0.0)


@given(st.floats(0.5, 60.0))
@settings(max_examples=40)
def test_yn_table_matches_scipy(z):
    L = min(12, int(z) + 2)
    got = spherical_yn_table(L, np.array([z]))[:, 0]
    ref = spherical_yn(np.arange(L + 1), z)
    assert np.allclose(got, ref, rtol=1e-10, atol=0)


@given(st.floats(-1, 1))
def test_legendre_table(x):
    t = legendre_table(10, np.array([x]))[:, 0]
    assert np.allclose(t, eval_legendre(np.arange(11), x), atol=1e-13)


def _square_well_delta0(depth, a, k):
    K = np.sqrt(k * k + depth)
    return np.arctan(k * np.tan(K * a) / K) - k * a


@pytest.mark.parametrize("k", [0.4, 1.3, 3.0])
def test_square_well_phase_shift(k):
    # closed-form s-wave phase shift of a square well; the step sits on a grid node
    depth, a = 4.0, 1.0
    V = lambda r: np.where(np.asarray(r) < a, -depth, 0.0)
    s = RadialSolver(V, a, steps=4000)
    d = float(s.phase_shift(0, np.array([k]))[0])
    ref = _square_well_delta0(depth, a, k)
    # phase shifts are defined modulo pi
    assert 0.5 * np.angle(np.exp(2j * (d - ref))) == pytest.approx(0.0, abs=2e-4)


def test_free_solver_gives_bessel():
    s = RadialSolver(lambda r: np.zeros_like(np.asarray(r, float)), 1.0, steps=1000)
    k = np.array([0.5, 2.0])
    r = np.linspace(0.1, 5, 30)
    for ell in range(3):
        got = s.radial_function(ell, k, r)
        assert np.allclose(got, spherical_jn(ell, k[:, None] * r[None, :]), atol=1e-8)


def test_shared_tables_match_single_channel(well):
    s = RadialSolver(well, 1.0)
    k = np.linspace(0.05, 12, 25)
    r = np.concatenate([np.linspace(0.01, 0.99, 20), np.linspace(1, 25, 40)])
    for ell, T in enumerate(s.radial_functions(20, k, r)):
        assert np.max(np.abs(T - s.radial_function(ell, k, r))) < 1e-10
