import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermion.fgr import InteractionG, level_shift_from_tables
from thermion.oracle import (
    angular_factors,
    assemble_sectors,
    branch_split,
    oracle_comparison,
    photon_weight,
    pi_w_resolvent_w_pi,
)
from thermion.quadrature import k_grid, sphere_rule
from thermion.thermal import uniform_u_grid


@pytest.mark.parametrize("degree,ell_max", [(7, 3), (17, 8)])
def test_angular_factors_exact_up_to_half_degree(degree, ell_max):
    A = angular_factors(ell_max, sphere_rule(degree))
    np.testing.assert_allclose(A, 2 * np.arange(ell_max + 1) + 1, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(beta=st.floats(0.1, 10.0), u=st.floats(1e-3, 20.0))
def test_photon_weight_detailed_balance(beta, u):
    # t(-u)^2 = e^{-beta u} t(u)^2
    lhs = photon_weight(beta, -u) ** 2
    rhs = np.exp(-beta * u) * photon_weight(beta, u) ** 2
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_photon_weight_vanishes_at_zero():
    assert photon_weight(1.0, 0.0) == 0.0


@pytest.fixture(scope="module")
def small_sectors(engine, coupling):
    g = InteractionG(coupling, 0.05)
    kg = k_grid(4.0, 0.5, 3, sphere_degree=3)
    return assemble_sectors(engine, g, 1.0, kg, uniform_u_grid(3.0, 12), sphere_rule(5))


def test_dense_column_norm_matches_channel_sum(small_sectors):
    # both routes sum |Y_lm|^2 on the same nodes, so they agree even past the rule's exact degree
    dense = np.linalg.norm(small_sectors.w_block())
    assert dense == pytest.approx(small_sectors.column_norm(restrict=False), rel=1e-11)


def test_discrete_rows_only_add(small_sectors):
    for eps in (0.05, 0.5):
        full = pi_w_resolvent_w_pi(small_sectors, eps, restrict=False)[0, 0]
        part = pi_w_resolvent_w_pi(small_sectors, eps, restrict=True)[0, 0]
        assert full >= part > 0


def test_branch_split_adds_up(small_sectors):
    b = branch_split(small_sectors, 0.1)
    assert b["absorption"] > 0 and b["emission"] > 0
    assert b["total"] == pytest.approx(0.1 * pi_w_resolvent_w_pi(small_sectors, 0.1)[0, 0], rel=1e-12)


def test_matrix_route_matches_quadrature(engine, fgr_setup):
    s = fgr_setup
    lvl = level_shift_from_tables(s["tables"], 0.1, 1.0)
    out = oracle_comparison(engine, s["interaction"], 1.0, 0.1, s["kgrid"], s["omega_max"], n_u=100, level=lvl)
    assert out["rel_diff"] <= 1e-2
    assert out["rel_diff_F1"] <= 2e-2
    assert out["rel_diff_F2"] <= 2e-2
