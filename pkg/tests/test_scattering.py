import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermion.born import probe_points
from thermion.quadrature import k_grid, random_rotation, spherical_grid, support_grid
from thermion.scattering import (Engine, SingularSystem, TransformPlan, dilation_commutator_check,
                                 gaussian, gaussian_ft, generalized_fourier, recover_phi, rollnik_operator,
                                 shell_bump, solve_scattering_state, spectral_identities_check,
                                 uniform_radial_grid)

K = np.array([0.3, 0.5, 1.2])


@pytest.fixture(scope="module")
def pts():
    return probe_points(1.0, 20)


def test_free_case_is_plane_wave(free_well, pts):
    s = solve_scattering_state(free_well, K, support_grid(1.0))
    assert np.max(np.abs(recover_phi(s, pts) - np.exp(1j * pts @ K))) <= 1e-12


def test_nystrom_against_partial_waves(well, engine, pts):
    # two independent routes to phi(k, x): Lippmann-Schwinger on a volume grid and radial Numerov
    errs = []
    for nr, sd in [(24, 7), (24, 11)]:
        s = solve_scattering_state(well, K, support_grid(1.0, nr, sd))
        assert s.residual < 1e-10
        errs.append(np.max(np.abs(recover_phi(s, pts) - engine.phi(K, pts))) / np.max(np.abs(engine.phi(K, pts))))
    assert errs[1] < errs[0]
    assert errs[1] < 2e-2


def test_partial_wave_phi_free_limit(pts):
    from thermion.potential import make_bump_well
    eng = Engine(make_bump_well(0.0, 1.0, 0.5))
    assert np.allclose(eng.phi(K, pts), np.exp(1j * pts @ K), atol=1e-10)


@given(st.integers(0, 1000))
@settings(max_examples=5, deadline=None)
def test_phi_rotation_covariant(seed):
    # radial V: phi(Qk, Qx) = phi(k, x)
    eng = _ENGINE()
    Q = random_rotation(seed)
    x = probe_points(1.0, 6, seed=seed)
    assert np.allclose(eng.phi(Q @ K, x @ Q.T), eng.phi(K, x), atol=1e-10)


_cache = {}


def _ENGINE():
    if "e" not in _cache:
        from thermion.potential import make_bump_well
        _cache["e"] = Engine(make_bump_well(10.0, 1.0, 0.5))
    return _cache["e"]


def test_rollnik_operator_shapes_and_singularity(well):
    g = support_grid(1.0, 12, 7)
    L = rollnik_operator(well, 1.0, g)
    assert L.shape == (g.size, g.size)
    from thermion.potential import make_bump_well
    with pytest.raises(SingularSystem):
        # an exactly singular I - L
        solve_scattering_state(well, K, g, L=np.eye(g.size))


def test_free_transform_is_fourier(free_well):
    # V = 0: the generalized transform is the plain Fourier transform of a Gaussian
    eng = Engine(free_well)
    g = spherical_grid(7.0, 16, 8, 17)
    kg = k_grid(6.0, 0.25, 6, 17)
    c = [0.3, -0.2, 0.4]
    fs = generalized_fourier(gaussian(c, 0.6), g, eng, kg)
    ref = gaussian_ft(c, 0.6)(kg.nodes.reshape(-1, 3)).reshape(kg.shape)
    assert np.max(np.abs(fs - ref)) < 1e-6 * np.max(np.abs(ref))


def test_spectral_identities_coarse(engine):
    g = spherical_grid(7.0, 16, 8, 17, r_split=1.0)
    kg = k_grid(16.0, 0.25, 6, 17)
    rep = spectral_identities_check(engine, g, kg)
    assert rep["parseval_defect"] < 1e-5
    assert rep["intertwining_defect"] < 1e-4
    assert rep["reconstruction_defect"] < 1e-3
    assert rep["bound_orthogonality"] < 1e-3


def test_truncation_warning(engine):
    from thermion.scattering import DomainTruncationWarning
    g = spherical_grid(1.0, 4, 4, 7)
    kg = k_grid(2.0, 0.5, 4, 7)
    with pytest.warns(DomainTruncationWarning):
        generalized_fourier(gaussian([0, 0, 0], 2.0), g, engine, kg)


def test_dilation_identity_and_refinement():
    ug = uniform_radial_grid(4.0, 120)
    f = shell_bump(1.0, 2.0)
    a = dilation_commutator_check(ug.sample(f), ug)
    ug2 = ug.refined()
    b = dilation_commutator_check(ug2.sample(f), ug2)
    assert a["defect"] < 1e-2
    assert b["defect"] < 0.5 * a["defect"]
    assert abs(a["form_imag"]) < 1e-10
    assert a["form_real"] == pytest.approx(a["form_target"], rel=1e-2)
