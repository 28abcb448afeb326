"""Level-shift (Fermi Golden Rule) integrals for a radial atom coupled to the field.

    F1 = int dw dS  w^2 rho(w)      G R_eps(E + w) G*,
    F2 = int dw dS  w^2 (1 + rho(w)) G* R_eps(E - w) G,
    R_eps(z) = eps P_ess / ((H - z)^2 + eps^2),

with G(w, S)(x) = kappa(w) e^{i a w S.x} chi(alpha^delta x).  For an s-wave
bound state the S and k-direction integrals are done exactly by the addition
theorem:

    int dS int dk_hat |(V_c G phi_E)(k)|^2 = (2pi)^-3 (4pi)^4 |kappa|^2 sum_l (2l+1) |c_l(k, a w)|^2,
    c_l(k, q) = (4 pi)^{-1/2} int conj(R_l(k, r)) j_l(q r) chi(alpha^delta r) u_E(r) r dr.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import spherical_jn

from .potential import BoundState, Potential, smooth_step
from .quadrature import KGrid, gauss_panels, k_grid
from .radial import spherical_jn_table
from .scattering import Engine
from .thermal import Coupling, planck, uv_cutoff

FOURPI = 4.0 * np.pi
PAIR_NORM = (2.0 * np.pi) ** -3 * FOURPI**4


class QuadratureBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class InteractionG:
    """G(w, S)(x) = kappa(w) e^{i a w S.x} chi(alpha^delta x).

    ``phase`` = "unit" takes a = 1 (the form used for positivity); "alpha"
    takes a = alpha (the dipole regime).  chi equals chi_zero on |y| <= chi_radius
    and vanishes beyond 2 chi_radius.
    """

    coupling: Coupling
    alpha: float = 0.05
    chi_zero: float = 1.0
    chi_radius: float = 1.0
    phase: str = "unit"
    delta: float = 1.0

    @property
    def phase_scale(self) -> float:
        return self.alpha if self.phase == "alpha" else 1.0

    @property
    def cutoff_scale(self) -> float:
        return self.alpha**self.delta

    def chi(self, y):
        y = np.asarray(y, dtype=float)
        return self.chi_zero * smooth_step((y - self.chi_radius) / self.chi_radius)

    def chi_at(self, r):
        """chi(alpha^delta r) for radii r."""
        return self.chi(self.cutoff_scale * np.asarray(r, dtype=float))

    def plateau_radius(self) -> float:
        """Radius (in x) on which chi(alpha^delta x) is constant."""
        return np.inf if self.cutoff_scale == 0 else self.chi_radius / self.cutoff_scale

    def __call__(self, omega: float, sigma, x):
        x = np.asarray(x, dtype=float)
        sig = np.asarray(sigma, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        ph = np.exp(1j * self.phase_scale * omega * (x @ sig))
        return complex(self.coupling(omega)) * ph * self.chi_at(r)

    def with_alpha(self, alpha: float) -> "InteractionG":
        return InteractionG(self.coupling, alpha, self.chi_zero, self.chi_radius, self.phase, self.delta)

    def derivative_bounds(self, order: int = 2, samples: int = 401) -> list:
        """sup_x (a|x|)^n |chi(alpha^delta x)| for n <= order.

        The n-th w-derivative of e^{i a w S.x} chi is bounded by these numbers
        uniformly in w, so finite values mean G grows at most like d^n kappa.
        """
        x_max = 2.0 * self.plateau_radius()
        if not np.isfinite(x_max):
            # no cutoff: only n = 0 stays bounded
            return [float(abs(self.chi_zero))] + [np.inf] * order
        xs = np.linspace(0.0, x_max, samples)
        chi = np.abs(self.chi_at(xs))
        return [float(np.max((self.phase_scale * xs) ** n * chi)) for n in range(order + 1)]


def default_interaction(coupling: Coupling, alpha: float = 0.05, **kw) -> InteractionG:
    return InteractionG(coupling, alpha, **kw)


# --------------------------------------------------------------------------
# radial overlaps
# --------------------------------------------------------------------------

def overlap_radial_rule(state: BoundState, interaction: InteractionG, R: float,
                        tail: float = 1e-16, panel: float = 0.25, order: int = 8):
    """Gauss panels on (0, r_max) with a break at the support radius; r_max where u_E (times chi) is negligible."""
    r_max = R + max(-np.log(tail) / state.decay_rate, 1.0)
    # chi(alpha^delta r) vanishes beyond twice its plateau
    r_max = max(min(r_max, 2.0 * interaction.plateau_radius()), 1.5 * R)
    inner = np.linspace(0.0, R, max(2, int(np.ceil(R / panel))) + 1)
    outer = np.linspace(R, r_max, max(2, int(np.ceil((r_max - R) / panel))) + 1)[1:]
    return gauss_panels(np.concatenate([inner, outer]), order)


def _ell_cutoff(jq, s, tol: float) -> int:
    """Smallest l_max past which (2l+1) max_q (int |j_l(q r) s(r)| dr)^2 stays below tol * peak.

    |R_l| is O(1) on the support of s, so this bounds |c_l|^2 independently of k.
    """
    b = (2 * np.arange(jq.shape[0]) + 1) * np.max(np.abs(jq) @ np.abs(s), axis=1) ** 2
    peak = np.maximum.accumulate(b)
    small = b <= tol * peak
    for ell in range(len(b) - 3):
        if small[ell:ell + 3].all():
            return ell + 2
    return len(b) - 1


def channel_overlaps(engine: Engine, state: BoundState, interaction: InteractionG, k, q,
                     ell_max: int | None = None, tol: float = 1e-12, rule=None, chunk: int = 128,
                     ell_cap: int = 120):
    """c_l(k, q) for l = 0..l_max; returns array (n_l, n_k, n_q)."""
    if state.ell != 0:
        raise NotImplementedError("level shifts are implemented for s-wave bound states")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    r, w = rule if rule is not None else overlap_radial_rule(state, interaction, engine.R)
    s = w * state.u(r) * r * interaction.chi_at(r) / np.sqrt(FOURPI)
    # j_l(-x) = (-1)^l j_l(x)
    aq = np.abs(q)
    sign = np.where(q < 0, -1.0, 1.0)
    jq = spherical_jn_table(ell_cap if ell_max is None else ell_max, aq[:, None] * r[None, :])
    if ell_max is None:
        ell_max = _ell_cutoff(jq, s, tol)
    out = np.empty((ell_max + 1, len(k), len(q)), dtype=complex)
    for st in range(0, len(k), chunk):
        sl = slice(st, st + chunk)
        for ell, tab in enumerate(engine.radial_tables(ell_max, k[sl], r)):
            A = np.conj(tab) * s[None, :]
            # contiguous real operands keep the products on the BLAS path
            J = np.ascontiguousarray((jq[ell] * sign[:, None] ** ell).T)
            out[ell, sl] = np.ascontiguousarray(A.real) @ J + 1j * (np.ascontiguousarray(A.imag) @ J)
    return out


def pair_density(c) -> np.ndarray:
    """(2pi)^-3 (4pi)^4 sum_l (2l+1)|c_l|^2: S- and k_hat-integrated |V_c G~ phi_E|^2."""
    ell = np.arange(c.shape[0])[:, None, None]
    return PAIR_NORM * np.sum((2 * ell + 1) * np.abs(c) ** 2, axis=0)


def lorentzian(x, eps: float):
    return eps / (x * x + eps * eps)


# --------------------------------------------------------------------------
# level shift
# --------------------------------------------------------------------------

@dataclass
class LevelShiftResult:
    E: float
    epsilon: float
    beta: float
    F1: float
    F2: float
    F2_swapped: float
    gamma: float
    epsilon_bounds: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"E": self.E, "eps": self.epsilon, "beta": self.beta, "F1": self.F1, "F2": self.F2,
                "F2_swapped": self.F2_swapped, "gamma": self.gamma, "epsilon_bounds": self.epsilon_bounds,
                **self.info}


def fgr_k_grid(E: float, epsilon: float, omega_max: float, k_max: float = 12.0,
               panel_width: float = 0.25, order: int = 6) -> KGrid:
    """KGrid whose k^2 spacing is below eps/4 wherever a resonant shell k^2 = E + w can sit."""
    fine = max(E + omega_max, 0.0) + 10.0 * epsilon
    return k_grid(k_max, panel_width, order, sphere_degree=3, fine_energy=fine, energy_step=epsilon / 4.0)


def omega_rule(omega_max: float, panel: float = 0.1, order: int = 8):
    n = max(1, int(np.ceil(omega_max / panel)))
    return gauss_panels(np.linspace(0.0, omega_max, n + 1), order)


def check_resolution(kgrid: KGrid, E: float, omegas, epsilon: float) -> float:
    """Largest k^2 spacing near any resonant shell; raises if it exceeds eps/3."""
    worst = 0.0
    for w in omegas:
        e0 = E + w
        if e0 <= 0 or e0 > kgrid.radial[-1] ** 2:
            continue
        worst = max(worst, kgrid.max_energy_spacing(e0 - epsilon, e0 + epsilon))
    if worst >= epsilon / 3.0:
        raise QuadratureBudgetError(f"k^2 spacing {worst:.3g} does not resolve eps = {epsilon}")
    return worst


@dataclass
class FGRTables:
    """Everything level_shift needs that does not depend on beta or eps."""

    E: float
    k: np.ndarray
    k_weights: np.ndarray
    omega: np.ndarray
    omega_weights: np.ndarray
    kappa2: np.ndarray
    density: np.ndarray  # (n_k, n_omega) pair density at q = a w
    density_swapped: np.ndarray
    chi_phi_norm2: float


def fgr_tables(engine: Engine, state: BoundState, interaction: InteractionG, kgrid: KGrid,
               omega_max: float, omega_panel: float = 0.1) -> FGRTables:
    w, ww = omega_rule(omega_max, omega_panel)
    q = interaction.phase_scale * w
    # G* carries e^{-i a w S.x}: the swapped ordering is the same overlap at -q
    both = channel_overlaps(engine, state, interaction, kgrid.radial, np.concatenate([q, -q]))
    c, c_sw = both[:, :, : len(q)], both[:, :, len(q):]
    r, rw = overlap_radial_rule(state, interaction, engine.R)
    chi_phi = float(np.sum(rw * (state.u(r) * interaction.chi_at(r)) ** 2))
    kap2 = np.abs(np.asarray(interaction.coupling(w), dtype=complex)) ** 2
    return FGRTables(state.energy, kgrid.radial, kgrid.radial_weights, w, ww, kap2,
                     pair_density(c), pair_density(c_sw), chi_phi)


def _branch(t: FGRTables, weight, sign: float, eps: float, density) -> float:
    """sum_w W(w) |kappa|^2 sum_k k^2 S(k, w) L_eps(k^2 - E - sign*w)."""
    L = lorentzian(t.k[:, None] ** 2 - t.E - sign * t.omega[None, :], eps)
    inner = (t.k_weights * t.k**2) @ (density * L)
    return float(np.sum(t.omega_weights * weight * t.kappa2 * inner))


def level_shift_from_tables(t: FGRTables, epsilon: float, beta: float) -> LevelShiftResult:
    w = t.omega
    rho = planck(beta, w)
    w1, w2 = w * w * rho, w * w * (1.0 + rho)
    F1 = _branch(t, w1, +1.0, epsilon, t.density)
    F2 = _branch(t, w2, -1.0, epsilon, t.density_swapped)
    F2s = _branch(t, w2, -1.0, epsilon, t.density)
    bound = lambda wt: float(np.sum(t.omega_weights * wt * t.kappa2) * FOURPI * t.chi_phi_norm2 / epsilon)
    return LevelShiftResult(t.E, epsilon, beta, F1, F2, F2s, F1 + F2,
                            {"F1": bound(w1), "F2": bound(w2)},
                            {"omega_max": float(w[-1] + 0.0), "n_k": len(t.k), "n_omega": len(w)})


def level_shift(engine: Engine, state: BoundState, interaction: InteractionG, epsilon: float,
                beta: float, kgrid: KGrid | None = None, omega_max: float | None = None) -> LevelShiftResult:
    """F1, F2 and gamma = p_E (F1 + F2) p_E for a non-degenerate s-wave eigenvalue."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if omega_max is None:
        omega_max = uv_cutoff(interaction.coupling, beta, rel=1e-10)
    if kgrid is None:
        kgrid = fgr_k_grid(state.energy, epsilon, omega_max)
    w, _ = omega_rule(omega_max)
    check_resolution(kgrid, state.energy, w, epsilon)
    t = fgr_tables(engine, state, interaction, kgrid, omega_max)
    return level_shift_from_tables(t, epsilon, beta)


# --------------------------------------------------------------------------
# positivity witness
# --------------------------------------------------------------------------

def positivity_witness(engine: Engine, state: BoundState, interaction: InteractionG,
                       omega: float, sigma=(0.0, 0.0, 1.0)) -> float:
    """||P_ess G(w, S) phi_E||^2 = ||G phi_E||^2 - sum_n |<phi_n, G phi_E>|^2.

    Only the m = 0 member (about S) of each bound multiplet overlaps
    e^{i q S.x} chi phi_E when phi_E is an s-state:
    <phi_n, G phi_E> = kappa i^l sqrt(2l+1) int u_n j_l(q r) chi u_E dr.
    """
    if state.ell != 0:
        raise NotImplementedError("witness implemented for s-wave bound states")
    kap2 = abs(complex(interaction.coupling(omega))) ** 2 if omega > 0 else 0.0
    if kap2 == 0.0:
        return 0.0
    r, w = overlap_radial_rule(state, interaction, engine.R)
    base = state.u(r) * interaction.chi_at(r)
    total = float(np.sum(w * base**2))
    q = interaction.phase_scale * omega
    proj = 0.0
    for st in engine.bound_states:
        ov = np.sum(w * st.u(r) * spherical_jn(st.ell, q * r) * base)
        proj += (2 * st.ell + 1) * ov**2
    return kap2 * (total - proj)


# --------------------------------------------------------------------------
# dipole regime
# --------------------------------------------------------------------------

def dipole_matrix_elements(engine: Engine, state: BoundState, p, rule=None) -> np.ndarray:
    """I_1(p) = int u_E(r) R_1(p, r) r^2 dr, so <phi_E, S.x phi(p)> = (2pi)^{-3/2} i sqrt(4pi) (S.p_hat) I_1(p)."""
    r, w = rule if rule is not None else overlap_radial_rule(state, InteractionG(None, 0.0), engine.R)
    return engine.radial_table(1, p, r) @ (w * state.u(r) * r * r)


def on_shell_rule(E: float, omega_max: float, panel: float = 0.05, order: int = 8):
    """Gauss rule in p on (0, sqrt(omega_max + E)] (photon energy w = p^2 - E up to omega_max)."""
    p_max = np.sqrt(max(omega_max + E, 0.0))
    n = max(1, int(np.ceil(p_max / panel)))
    return gauss_panels(np.linspace(0.0, p_max, n + 1), order)


def dipole_leading_term(engine: Engine, state: BoundState, interaction: InteractionG, beta: float,
                        omega_max: float | None = None) -> float:
    """pi alpha^2 |chi(0)|^2 int dS int dp w^4 |kappa(w)|^2 rho(w) |<phi_E, S.x phi(p)>|^2 at w = p^2 - E.

    The factor pi is the mass of the Lorentzian eps/(x^2 + eps^2) as eps -> 0.
    """
    a = interaction.alpha
    if a == 0 or interaction.chi_zero == 0:
        return 0.0
    if omega_max is None:
        omega_max = uv_cutoff(interaction.coupling, beta, rel=1e-12)
    p, pw = on_shell_rule(state.energy, omega_max)
    w = p * p - state.energy
    I1 = dipole_matrix_elements(engine, state, p)
    ang = (2.0 * np.pi) ** -3 * FOURPI * FOURPI * FOURPI / 3.0
    kap2 = np.abs(np.asarray(interaction.coupling(w), dtype=complex)) ** 2
    integrand = w**4 * planck(beta, w) * kap2 * ang * np.abs(I1) ** 2
    return float(np.pi * a * a * abs(interaction.chi_zero) ** 2 * np.sum(pw * p * p * integrand))


def f1_on_shell(engine: Engine, state: BoundState, interaction: InteractionG, beta: float,
                omega_max: float | None = None) -> float:
    """lim_{eps -> 0} <phi_E, F1 phi_E> = pi int dp p^2 w^2 rho(w) |kappa(w)|^2 S(p, a w), w = p^2 - E."""
    if omega_max is None:
        omega_max = uv_cutoff(interaction.coupling, beta, rel=1e-12)
    p, pw = on_shell_rule(state.energy, omega_max)
    w = p * p - state.energy
    q = interaction.phase_scale * w
    # only the diagonal (p_i, q_i) pairs are needed
    c = channel_overlaps(engine, state, interaction, p, q)
    S = pair_density(c)
    diag = np.diagonal(S)
    kap2 = np.abs(np.asarray(interaction.coupling(w), dtype=complex)) ** 2
    return float(np.pi * np.sum(pw * p * p * w * w * planck(beta, w) * kap2 * diag))


def dipole_error_slope(engine: Engine, state: BoundState, interaction: InteractionG, beta: float,
                       alphas, epsilon: float | None = None) -> dict:
    """|F1 - leading term| over alpha and its fitted log-log exponent.

    ``epsilon`` None uses the exact eps -> 0 on-shell form; a number evaluates
    F1 at that eps instead (a finite-eps proxy).
    """
    from .born import log_slope
    alphas = np.asarray(alphas, dtype=float)
    full, lead = [], []
    for a in alphas:
        g = interaction.with_alpha(a)
        lead.append(dipole_leading_term(engine, state, g, beta))
        if epsilon is None:
            full.append(f1_on_shell(engine, state, g, beta))
        else:
            full.append(level_shift(engine, state, g, epsilon, beta).F1)
    full, lead = np.array(full), np.array(lead)
    err = np.abs(full - lead)
    slope, band = log_slope(alphas, err)
    return {"alpha": alphas.tolist(), "full": full.tolist(), "leading": lead.tolist(),
            "error": err.tolist(), "exponent": slope, "band": band,
            "mode": "on-shell limit" if epsilon is None else f"eps = {epsilon} proxy"}


def dipole_completeness(engine: Engine, state: BoundState, p_max: float = 12.0) -> dict:
    """||x_3 phi_E||^2 against (2pi)^-3 int dp p^2 4pi (4pi/3) |I_1|^2 + sum_n |<phi_n, x_3 phi_E>|^2."""
    rule = overlap_radial_rule(state, InteractionG(None, 0.0), engine.R)
    r, w = rule
    u = state.u(r)
    lhs = float(np.sum(w * u * u * r * r)) / 3.0
    p, pw = gauss_panels(np.linspace(0.0, p_max, int(p_max / 0.1) + 1), 8)
    I1 = dipole_matrix_elements(engine, state, p, rule)
    cont = float((2.0 * np.pi) ** -3 * FOURPI * FOURPI / 3.0 * np.sum(pw * p * p * np.abs(I1) ** 2))
    disc = 0.0
    for st in engine.bound_states:
        if st.ell == 1:
            disc += float(np.sum(w * st.u(r) * r * u)) ** 2 / 3.0
    return {"norm": lhs, "continuum": cont, "discrete": disc, "rel_diff": abs(lhs - cont - disc) / lhs}
