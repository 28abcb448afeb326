import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermion.born import probe_points
from thermion.spheroidal import (OutOfDomain, klein_zemach_direct, klein_zemach_spheroidal,
                                 klein_zemach_sweep, prolate_frame, prolate_map, rotation_to)

vec = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@given(vec)
def test_rotation_to_orthogonal(u):
    Q = rotation_to(u)
    assert np.allclose(Q @ Q.T, np.eye(3), atol=1e-12)
    assert np.allclose(Q[:, 2], np.asarray(u) / np.linalg.norm(u), atol=1e-12)


def test_rotation_to_antipodal():
    Q = rotation_to([0, 0, -1])
    assert np.allclose(Q @ [0, 0, 1], [0, 0, -1])
    assert np.allclose(Q @ Q.T, np.eye(3))


@given(vec, vec, st.floats(0, 2), st.floats(-1, 1), st.floats(0, 2 * np.pi))
@settings(max_examples=60)
def test_prolate_map_focal_distances(x, xp, extra, eta, phi):
    f = prolate_frame(x, xp)
    xi = f.D + extra
    y, jac = prolate_map(f, xi, eta, phi)
    r1 = np.linalg.norm(y - f.x)
    r2 = np.linalg.norm(y - f.xp)
    # |x - y| = xi + D eta, |x' - y| = xi - D eta
    assert r1 == pytest.approx(xi + f.D * eta, abs=1e-10)
    assert r2 == pytest.approx(xi - f.D * eta, abs=1e-10)
    assert jac == pytest.approx(r1 * r2, abs=1e-10)


def test_prolate_domain_errors():
    f = prolate_frame([0, 0, 0], [0, 0, 1])
    with pytest.raises(OutOfDomain):
        prolate_map(f, 0.1, 0.0, 0.0)
    with pytest.raises(OutOfDomain):
        prolate_map(f, 1.0, 1.5, 0.0)
    assert prolate_frame([0.2, 0, 0], [0.2, 0, 0]).degenerate


def test_free_integral_vanishes(free_well):
    x, xp = probe_points(1.0, 2, seed=5)
    assert np.all(klein_zemach_sweep(free_well, x, xp, [0.0, 1.0, 7.0]) == 0)
    assert klein_zemach_direct(free_well, x, xp, 2.0) == 0


def test_kappa_zero_closed_form(well):
    # x = x', n1 = n2 = 1: I = int V = 4 pi int r^2 V(r) dr
    from scipy.integrate import quad
    ref = 4 * np.pi * quad(lambda r: r * r * float(well(np.array([r]))[0]), 0, 1, limit=200)[0]
    got = klein_zemach_spheroidal(well, [0.1, 0.0, 0.2], [0.1, 0.0, 0.2], 0.0, 1, 1)
    assert got == pytest.approx(ref, rel=1e-10)


@pytest.mark.parametrize("n1,n2,kappa", [(0, 0, 1.0), (1, 2, 3.0)])
def test_spheroidal_against_direct(well, n1, n2, kappa):
    # two quadrature routes: prolate coordinates versus a partitioned 3-D rule
    P = probe_points(1.0, 8, seed=5)
    x, xp = P[2], P[3]
    s = klein_zemach_spheroidal(well, x, xp, kappa, n1, n2)
    d = klein_zemach_direct(well, x, xp, kappa, n1, n2, 160, 160, 96)
    assert abs(s - d) / abs(d) < 5e-6


def test_sweep_matches_single(well):
    P = probe_points(1.0, 4, seed=2)
    ks = [1.0, 4.0, 9.0]
    sw = klein_zemach_sweep(well, P[0], P[1], ks, 1, 0)
    one = [klein_zemach_spheroidal(well, P[0], P[1], k, 1, 0) for k in ks]
    assert np.allclose(sw, one, rtol=1e-6)


def test_direct_warns_beyond_budget(well):
    from thermion.spheroidal import AccuracyWarning
    P = probe_points(1.0, 2, seed=5)
    with pytest.warns(AccuracyWarning):
        klein_zemach_direct(well, P[0], P[1], 80.0, n_theta=8, n_phi=8, n_rho=8)
