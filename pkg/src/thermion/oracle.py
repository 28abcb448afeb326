"""Matrix check of the pull-through identity on the 0/1-photon sectors.

The glued Liouvillian's free part is diagonal on one-photon states
|a> (x) |b> (x) a*(u, S) Omega with eigenvalue e_a - e_b + u.  W maps the
single Pi-vector phi_E (x) phi_E (x) Omega into that sector through

    a*(tau_b(G (x) Id)) - a*(e^{-b u/2} tau_b(Id (x) conj(G)*)),

and  M = W^dag (L0^2 + eps^2)^{-1} W  restricted to scattering (x) phi_E rows
must reproduce (F1 + F2)/eps.  Rows are labelled (k_a, l, m, u_i, S_j) for the
left factor's scattering channel, with amplitude

    sqrt(w_a w_i w_j) k_a  t(u_i)  (2 pi)^{-3/2} (4 pi)^2 Y*_lm(S_j) kappa c_l(k_a, +-a|u_i|),

t(u) = u sqrt(1 + rho(u)) for u > 0 and |u| sqrt(rho(|u|)) for u < 0 (where
G* enters and q changes sign).  The (m, S_j) sums are done on the nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import sph_harm_y, spherical_jn

from .fgr import InteractionG, channel_overlaps, overlap_radial_rule
from .quadrature import KGrid, SphereRule, sphere_rule
from .scattering import Engine
from .thermal import UGrid, planck, uniform_u_grid

AMP_NORM = (2.0 * np.pi) ** -1.5 * (4.0 * np.pi) ** 2


def photon_weight(beta: float, u) -> np.ndarray:
    """t(u): u sqrt(1 + rho(u)) for u > 0, |u| sqrt(rho(|u|)) for u < 0."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    # t vanishes like sqrt(|u| / beta) at u = 0
    rho = planck(beta, np.where(a > 0, a, 1.0))
    return np.where(a > 0, np.where(u > 0, a * np.sqrt(1.0 + rho), a * np.sqrt(rho)), 0.0)


def angular_factors(ell_max: int, sphere: SphereRule) -> np.ndarray:
    """A_l = sum_j w_j sum_m |Y_lm(S_j)|^2 on the photon direction nodes (2l+1 when exact)."""
    pts = sphere.points
    theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.zeros(ell_max + 1)
    for ell in range(ell_max + 1):
        m = np.arange(-ell, ell + 1)[:, None]
        Y = sph_harm_y(ell, m, theta[None, :], phi[None, :])
        out[ell] = float(np.sum(sphere.weights[None, :] * np.abs(Y) ** 2))
    return out


@dataclass
class ToySectors:
    E: float
    beta: float
    k: np.ndarray
    k_weights: np.ndarray
    u: np.ndarray
    u_weights: np.ndarray
    sphere: SphereRule = field(repr=False)
    weight: np.ndarray = field(repr=False)  # t(u_i)
    amplitude: np.ndarray = field(repr=False)  # (n_l, n_k, n_u): scattering (x) phi_E rows, S-factor removed
    angular: np.ndarray = field(repr=False)  # (n_l,)
    bound_amplitude: np.ndarray = field(repr=False)  # (n_bound, n_u): phi_n (x) phi_E rows, Y_00 removed
    bound_energies: np.ndarray = field(repr=False)
    right_amplitude: np.ndarray = field(repr=False)  # (n_bound, n_u): phi_E (x) phi_m rows

    @property
    def L0_scattering(self) -> np.ndarray:
        """k^2 - E + u on the (k, u) rows."""
        return self.k[:, None] ** 2 - self.E + self.u[None, :]

    def w_block(self) -> np.ndarray:
        """Dense W column (only for small grids): rows (l, m, a, i, j) then bound and right rows."""
        pts = self.sphere.points
        theta = np.arccos(np.clip(pts[:, 2], -1.0, 1.0))
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        sw = np.sqrt(self.sphere.weights)
        parts = []
        for ell in range(self.amplitude.shape[0]):
            for m in range(-ell, ell + 1):
                Yc = np.conj(sph_harm_y(ell, m, theta, phi)) * sw
                parts.append((self.amplitude[ell][:, :, None] * Yc[None, None, :]).ravel())
        # s-wave bound rows carry their S-dependence as Y_00 = (4 pi)^{-1/2}
        y00 = sw / np.sqrt(4.0 * np.pi)
        for amp in (self.bound_amplitude, self.right_amplitude):
            parts.append((amp[:, :, None] * y00[None, None, :]).ravel())
        return np.concatenate(parts)

    def column_norm(self, restrict: bool = False) -> float:
        tot = float(np.sum(self.angular[:, None, None] * np.abs(self.amplitude) ** 2))
        if not restrict:
            tot += float(np.sum(np.abs(self.bound_amplitude) ** 2) + np.sum(np.abs(self.right_amplitude) ** 2))
        return float(np.sqrt(tot))


def assemble_sectors(engine: Engine, interaction: InteractionG, beta: float, kgrid: KGrid,
                     ugrid: UGrid, sphere: SphereRule | None = None, state=None) -> ToySectors:
    """Photon-sector amplitudes of W out of phi_E (x) phi_E (x) Omega."""
    state = state if state is not None else engine.bound_states[0]
    sphere = sphere if sphere is not None else sphere_rule(7)
    u, wu = ugrid.u, ugrid.weights
    a = np.abs(u)
    t = photon_weight(beta, u)
    qs = interaction.phase_scale * a * np.where(u > 0, 1.0, -1.0)
    c = channel_overlaps(engine, state, interaction, kgrid.radial, qs)
    kap = np.asarray(interaction.coupling(a), dtype=complex)
    kap = np.where(u > 0, kap, np.conj(kap))
    pref = np.sqrt(kgrid.radial_weights) * kgrid.radial
    amp = AMP_NORM * c * pref[None, :, None] * (np.sqrt(wu) * t * kap)[None, None, :]
    # discrete rows: <phi_n, G phi_E> needs only j_0 for s-waves and does not
    # depend on S; sqrt(4 pi) is its S-integrated norm (Y_00 factor removed)
    r, w = overlap_radial_rule(state, interaction, engine.R)
    base = w * state.u(r) * interaction.chi_at(r)
    j0 = spherical_jn(0, np.abs(qs)[:, None] * r[None, :])
    bound, right, energies = [], [], []
    for st in engine.bound_states:
        if st.ell != 0:
            continue
        ov = np.sqrt(4.0 * np.pi) * (j0 @ (base * st.u(r)))
        bound.append(np.sqrt(wu) * t * kap * ov)
        right.append(-np.exp(-0.5 * beta * u) * np.sqrt(wu) * t * kap * ov)
        energies.append(st.energy)
    return ToySectors(state.energy, beta, kgrid.radial, kgrid.radial_weights, u, wu, sphere, t, amp,
                      angular_factors(c.shape[0] - 1, sphere), np.array(bound), np.array(energies),
                      np.array(right))


def _row_sums(s: ToySectors, eps: float):
    """Per-photon-node contributions to M from the scattering (x) phi_E rows."""
    D = 1.0 / (s.L0_scattering**2 + eps * eps)
    per = np.einsum("l,lkn,kn->n", s.angular, np.abs(s.amplitude) ** 2, D)
    return per


def pi_w_resolvent_w_pi(s: ToySectors, eps: float, restrict: bool = True) -> np.ndarray:
    """M = W^dag (L0^2 + eps^2)^{-1} W on ran Pi (a 1x1 Hermitian matrix here).

    ``restrict`` keeps only the P_ess (x) p_E rows; otherwise the discrete-left
    rows (L0 = E_n - E + u) and right-coupling rows (L0 = E - E_m + u) are added.
    """
    M = float(np.sum(_row_sums(s, eps)))
    if not restrict:
        for En, b, rt in zip(s.bound_energies, s.bound_amplitude, s.right_amplitude):
            M += float(np.sum(np.abs(b) ** 2 / ((En - s.E + s.u) ** 2 + eps * eps)))
            M += float(np.sum(np.abs(rt) ** 2 / ((s.E - En + s.u) ** 2 + eps * eps)))
    return np.array([[M]])


def branch_split(s: ToySectors, eps: float) -> dict:
    """eps * (u < 0 part, u > 0 part, total) of the restricted M."""
    per = eps * _row_sums(s, eps)
    neg = float(np.sum(per[s.u < 0]))
    pos = float(np.sum(per[s.u > 0]))
    return {"absorption": neg, "emission": pos, "total": neg + pos}


def oracle_comparison(engine: Engine, interaction: InteractionG, beta: float, eps: float,
                      kgrid: KGrid, omega_max: float, n_u: int = 200, sphere: SphereRule | None = None,
                      level=None) -> dict:
    """eps * M against p_E (F1 + F2) p_E, total and per branch."""
    from .fgr import level_shift
    s = assemble_sectors(engine, interaction, beta, kgrid, uniform_u_grid(omega_max, n_u), sphere)
    split = branch_split(s, eps)
    if level is None:
        level = level_shift(engine, engine.bound_states[0], interaction, eps, beta, kgrid, omega_max)
    rel = abs(split["total"] - level.gamma) / level.gamma
    return {"gamma_matrix": split["total"], "gamma_quadrature": level.gamma, "rel_diff": rel,
            "branch_split": split, "F1": level.F1, "F2": level.F2,
            "rel_diff_F1": abs(split["absorption"] - level.F1) / level.F1,
            "rel_diff_F2": abs(split["emission"] - level.F2) / level.F2}
