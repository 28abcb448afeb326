import warnings

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import spherical_jn

from thermion.fgr import (
    InteractionG,
    QuadratureBudgetError,
    channel_overlaps,
    check_resolution,
    dipole_completeness,
    dipole_error_slope,
    dipole_leading_term,
    level_shift,
    level_shift_from_tables,
    lorentzian,
    overlap_radial_rule,
    pair_density,
    positivity_witness,
)
from thermion.potential import make_bump_well
from thermion.quadrature import k_grid
from thermion.scattering import Engine

# [DERIVED] frozen from the Gauss-panel tables at alpha = 0.05, eps = 0.1, beta = 1
F1_FROZEN = 0.0022426209589416386
F2_FROZEN = 0.002107548821479985
WITNESS_FROZEN = 0.025700050113289626


@pytest.fixture(scope="module")
def shift(fgr_setup):
    return level_shift_from_tables(fgr_setup["tables"], 0.1, 1.0)


@pytest.mark.parametrize("ell", [0, 1, 3])
def test_channel_overlap_matches_adaptive_quadrature(engine, ground, coupling, ell):
    g = InteractionG(coupling, 0.3)
    k, q = 1.5, 1.0
    c = channel_overlaps(engine, ground, g, [k], [q])[ell, 0, 0]

    def integrand(x):
        R = engine.radial_table(ell, np.array([k]), np.array([x]))[0, 0]
        return np.conj(R) * spherical_jn(ell, q * x) * g.chi_at(x) * ground.u(x) * x / np.sqrt(4 * np.pi)

    kw = dict(points=[0.5, 1.0], limit=400, epsabs=1e-14)
    ref = quad(lambda x: integrand(x).real, 0, 40, **kw)[0] + 1j * quad(lambda x: integrand(x).imag, 0, 40, **kw)[0]
    assert abs(c - ref) <= 1e-7 * abs(ref)


def test_pair_density_matches_plane_wave_angular_integral(engine, ground, coupling, free_well):
    # with V = 0 the k-transform of e^{i q S.x} f(r) is a j_0 integral at |q S - k|,
    # so the S and k_hat integrals collapse to one integral over the angle between them
    free = Engine(free_well)
    g = InteractionG(coupling, 0.3)
    k, q = 1.5, 1.0
    S = pair_density(channel_overlaps(free, ground, g, [k], [q]))[0, 0]
    r, w = overlap_radial_rule(ground, g, engine.R)
    f = w * g.chi_at(r) * ground.u(r) * r / np.sqrt(4 * np.pi)

    def transform(K):
        return (2 * np.pi) ** -1.5 * 4 * np.pi * np.sum(spherical_jn(0, K * r) * f)

    ang = quad(lambda mu: transform(np.sqrt(q * q + k * k - 2 * q * k * mu)) ** 2, -1, 1, epsrel=1e-12)[0]
    assert S == pytest.approx(8 * np.pi**2 * ang, rel=1e-10)


def test_negative_q_is_parity(engine, ground, coupling):
    g = InteractionG(coupling, 0.3)
    c = channel_overlaps(engine, ground, g, [0.7, 2.0], [0.4, -0.4], ell_max=6)
    ell = np.arange(7)[:, None]
    np.testing.assert_allclose(c[:, :, 1], (-1.0) ** ell * c[:, :, 0], rtol=1e-13, atol=1e-16)


def test_lorentzian_mass_is_pi():
    for eps in (0.01, 0.1, 1.0):
        total = quad(lorentzian, -np.inf, np.inf, args=(eps,), points=None)[0]
        assert total == pytest.approx(np.pi, rel=1e-9)


def test_chi_plateau_and_support(coupling):
    g = InteractionG(coupling, 0.05, chi_zero=0.7, chi_radius=1.0)
    assert g.chi(0.0) == pytest.approx(0.7)
    assert g.chi(1.0) == pytest.approx(0.7)
    assert g.chi(2.0) == 0.0 and g.chi(3.5) == 0.0
    assert g.plateau_radius() == pytest.approx(20.0)
    assert g.chi_at(19.9) == pytest.approx(0.7)


def test_derivative_bounds_are_finite_with_cutoff(coupling):
    b = InteractionG(coupling, 0.05).derivative_bounds(3)
    assert np.all(np.isfinite(b)) and b[0] == pytest.approx(1.0)
    assert np.all(np.diff(b) > 0)
    assert np.isinf(InteractionG(coupling, 0.0).derivative_bounds(2)[1])


def test_frozen_level_shift(shift):
    assert shift.F1 == pytest.approx(F1_FROZEN, rel=1e-9)
    assert shift.F2 == pytest.approx(F2_FROZEN, rel=1e-9)
    assert shift.gamma == pytest.approx(F1_FROZEN + F2_FROZEN, rel=1e-12)


def test_swapped_ordering_gives_same_f2(shift):
    assert shift.F2_swapped == pytest.approx(shift.F2, rel=1e-12)


def test_gamma_positive_and_below_bounds(shift):
    assert shift.gamma > 0
    assert 0 < shift.F1 <= shift.epsilon_bounds["F1"]
    assert 0 < shift.F2 <= shift.epsilon_bounds["F2"]


def test_level_shift_monotone_in_temperature(fgr_setup):
    # more thermal photons at higher temperature feed both branches
    t = fgr_setup["tables"]
    hot, cold = level_shift_from_tables(t, 0.1, 1.0), level_shift_from_tables(t, 0.1, 4.0)
    assert hot.F1 > cold.F1 and hot.F2 > cold.F2


def test_unresolved_epsilon_raises(engine, ground, coupling):
    kg = k_grid(6.0, 0.5, 4, sphere_degree=3)
    with pytest.raises(QuadratureBudgetError):
        check_resolution(kg, ground.energy, [3.0, 4.0], 1e-3)
    with pytest.raises(ValueError):
        level_shift(engine, ground, InteractionG(coupling), 0.0, 1.0)


def test_frozen_witness(engine, ground, coupling):
    g = InteractionG(coupling, 0.05)
    assert positivity_witness(engine, ground, g, 1.0) == pytest.approx(WITNESS_FROZEN, rel=1e-9)
    assert positivity_witness(engine, ground, g, 0.0) == 0.0


def test_witness_positive_over_frequencies(engine, ground, coupling):
    g = InteractionG(coupling, 0.05)
    vals = [positivity_witness(engine, ground, g, w) for w in (0.1, 0.5, 2.0, 5.0)]
    assert min(vals) > 0


def test_dipole_leading_term_scales_as_alpha_squared(engine, ground, coupling):
    g = InteractionG(coupling, 0.01, phase="alpha")
    a = dipole_leading_term(engine, ground, g, 1.0)
    b = dipole_leading_term(engine, ground, g.with_alpha(0.02), 1.0)
    assert b / a == pytest.approx(4.0, rel=1e-12)
    assert dipole_leading_term(engine, ground, g.with_alpha(0.0), 1.0) == 0.0
    assert dipole_leading_term(engine, ground, InteractionG(coupling, 0.01, chi_zero=0.0, phase="alpha"), 1.0) == 0.0


def test_dipole_completeness(engine, ground):
    out = dipole_completeness(engine, ground)
    assert out["rel_diff"] < 1e-3
    # the well has no p-wave bound state
    assert out["discrete"] == 0.0


def test_dipole_error_falls_faster_than_leading_term(engine, ground, coupling):
    g = InteractionG(coupling, 0.05, phase="alpha")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = dipole_error_slope(engine, ground, g, 1.0, [0.02, 0.05, 0.1])
    assert out["exponent"] >= 2.7
    assert np.all(np.array(out["error"]) < np.array(out["leading"]))


def test_p_wave_state_rejected(coupling):
    well = make_bump_well(40.0, 1.0, 0.5)
    eng = Engine(well)
    p_states = [s for s in eng.bound_states if s.ell == 1]
    assert p_states
    with pytest.raises(NotImplementedError):
        channel_overlaps(eng, p_states[0], InteractionG(coupling), [1.0], [1.0])
