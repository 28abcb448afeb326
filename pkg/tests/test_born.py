import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermion.born import (InsufficientRange, born_expansion, born_remainder, born_term, bump3,
                           first_born_direct, fourier_cartesian, fourier_radial, log_slope, probe_points,
                           remainder_decay_fit, stationary_phase_probe, upper_envelope)

K = np.array([0.6, -0.8, 1.5])


@pytest.fixture(scope="module")
def pts():
    return probe_points(1.0, 10, seed=3)


def test_free_born_terms_vanish(free_well, pts):
    for n in (1, 2, 3):
        assert np.all(born_term(free_well, K, n, pts) == 0)
    assert np.allclose(born_term(free_well, K, 0, pts), np.exp(1j * pts @ K))


def test_first_born_two_routes(well, pts):
    # partial-wave series against direct 3-D quadrature of the Green's function integral
    pw = born_term(well, K, 1, pts)
    direct = np.array([first_born_direct(well, K, x) for x in pts])
    assert np.max(np.abs(pw - direct)) / np.max(np.abs(direct)) < 1e-6


def test_expansion_identity(well, pts):
    e = born_expansion(well, K, 3, pts)
    assert e.identity_residual() < 1e-8


def test_remainder_zero_is_phi(well, engine, pts):
    assert np.allclose(born_remainder(well, K, 0, pts), engine.phi(K, pts), atol=1e-8)


def test_remainder_needs_five_points(well):
    with pytest.raises(InsufficientRange):
        remainder_decay_fit(well, 3, [5, 10, 20])


def test_remainder_decay_short_sweep(well):
    r = remainder_decay_fit(well, 3, np.geomspace(5, 20, 5), points=probe_points(1.0, 12))
    assert r["exponent"] >= 0.7


@given(st.floats(-3, 3), st.floats(-5, 5))
def test_log_slope_exact_power(p, c):
    x = np.geomspace(1, 50, 7)
    slope, band = log_slope(x, np.exp(c) * x**p)
    assert slope == pytest.approx(p, abs=1e-9)
    assert band < 1e-6


@given(st.lists(st.floats(0, 10), min_size=1, max_size=20))
def test_upper_envelope_majorant(values):
    env = upper_envelope(values)
    assert np.all(env >= np.asarray(values))
    assert np.all(np.diff(env) <= 0)


def test_cartesian_fourier_against_radial():
    g = bump3((0.1, -0.2, 0.3), 1.0)
    gr = lambda r: np.exp(1 - 1 / (1 - np.minimum(r, 1 - 1e-16) ** 2)) * (r < 1)
    d = np.array([1.0, 2.0, 2.0]) / 3
    for kk in (1.0, 5.0, 20.0):
        a = abs(fourier_cartesian(g, kk * d, g.center, 1.0, 0.03))
        b = abs(fourier_radial(gr, kk, 1.0))
        assert a == pytest.approx(b, rel=1e-5)


def test_stationary_phase_decay():
    g = bump3((0.1, -0.2, 0.3), 1.0)
    r = stationary_phase_probe(g, 2, np.geomspace(4, 40, 8))
    assert r["slope"] <= -1.7
    assert r["max_ratio_to_bound"] <= 1.0
