"""Born series for phi(k, .): the T operators, terms, remainders and decay probes.

T^(n)_{V,kappa} psi(x) = int e^{i kappa |x-y|} |x-y|^{n-1} V(y) psi(y) dy, and

    phi = sum_{n<N} (-4pi)^{-n} T^n e_k + (-4pi)^{-N} T^N phi.

``apply_T`` discretises T on a SupportGrid.  Terms and remainders at high
momenta go through partial waves: T commutes with rotations, so it acts on
each radial channel of e_k or phi separately (``RadialSolver.t_channel``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import spherical_jn

from . import kernels
from .potential import Potential
from .quadrature import SupportGrid, gauss_panels, ray_rule
from .radial import RadialSolver, legendre_table
from .scattering import FOURPI, newton_self_term

EXTRA_WAVES = 30


class InsufficientRange(ValueError):
    pass


# --------------------------------------------------------------------------
# T on the support grid
# --------------------------------------------------------------------------

def apply_T(pot: Potential, kappa: float, n: int, psi, grid: SupportGrid, points) -> np.ndarray:
    """(T^(n) psi)(x) = sum_j w_j e^{i kappa r_j} r_j^{n-1} V(y_j) psi_j at each point.

    For n = 0 a point sitting on a node picks up that node's self-cell integral;
    for n = 1 the kernel is 1 there.
    """
    if n < 0 or n > 3:
        raise ValueError("apply_T supports 0 <= n <= 3")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pot.is_zero:
        return np.zeros(len(pts), dtype=complex)
    v = pot.at_points(grid.nodes)
    coeff = grid.weights * v * np.asarray(psi, dtype=complex)
    out = kernels.helmholtz_apply(pts, grid.nodes, coeff, float(kappa), n)
    d = np.linalg.norm(pts[:, None, :] - grid.nodes[None, :, :], axis=-1)
    hit_i, hit_j = np.nonzero(d == 0.0)
    if len(hit_i):
        if n == 0:
            cell = newton_self_term(grid)[hit_j] + 1j * kappa * grid.weights[hit_j]
            out[hit_i] += v[hit_j] * np.asarray(psi)[hit_j] * cell
        elif n == 1:
            out[hit_i] += coeff[hit_j]
    return out


def inverse_square_ball(x, R: float) -> float:
    """int_{|y|<R} |x - y|^{-2} dy, by one-dimensional quadrature over shells."""
    d = float(np.linalg.norm(x))
    if d == 0.0:
        return 4.0 * np.pi * R
    shell = lambda s: 2.0 * np.pi * s / d * np.log(abs((d + s) / (d - s))) if s != d else 0.0
    pts = [d] if d < R else None
    val, _ = quad(shell, 0.0, R, points=pts, limit=200)
    return float(val)


def t_bound(pot: Potential, psi_sup: float, x, n_r: int = 400) -> float:
    """||V||_2 ||psi||_inf (int_B |x-y|^{-2} dy)^{1/2}: the sup bound for T psi."""
    r, w = gauss_panels(np.linspace(0.0, pot.support_radius, n_r // 8 + 1), 8)
    v2 = 4.0 * np.pi * np.sum(w * r**2 * pot(r) ** 2)
    return float(np.sqrt(v2) * psi_sup * np.sqrt(inverse_square_ball(x, pot.support_radius)))


# --------------------------------------------------------------------------
# partial-wave Born terms
# --------------------------------------------------------------------------

def _solver(pot: Potential, kappa: float, steps: int | None):
    if steps is None:
        steps = max(2000, int(200 * kappa * pot.support_radius))
    return RadialSolver(pot, pot.support_radius, steps=steps)


def _geometry(k, points):
    k = np.asarray(k, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    kap = float(np.linalg.norm(k))
    if kap == 0.0:
        raise ValueError("Born terms need k != 0")
    r = np.linalg.norm(pts, axis=1)
    rr = np.where(r > 0, r, 1.0)
    cosg = np.where(r > 0, pts @ k / (rr * kap), 1.0)
    return kap, pts, r, cosg


def _series(solver: RadialSolver, kap, r, cosg, n: int, start, ell_max):
    """sum_l (2l+1) i^l [(-4pi)^{-n} T_l^n start_l](r) P_l(cos)."""
    P = legendre_table(ell_max, cosg)
    out = np.zeros(len(r), dtype=complex)
    grid = solver.r[: solver.n_in + 1]
    # product grids repeat each radius many times
    ru, back = np.unique(r, return_inverse=True)
    for ell in range(ell_max + 1):
        a = start(ell, grid)
        if n == 0:
            vals = start(ell, ru)
        else:
            for _ in range(n - 1):
                a = solver.t_channel(ell, kap, a) / (-FOURPI)
            vals = solver.t_channel(ell, kap, a, r_out=ru) / (-FOURPI)
        out += (2 * ell + 1) * (1j**ell) * vals[back] * P[ell]
    return out


def _plane_channel(kap):
    return lambda ell, r: spherical_jn(ell, kap * np.asarray(r)).astype(complex)


def _phi_channel(solver: RadialSolver, kap):
    def start(ell, r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, solver.h)
        vals = solver.radial_function(ell, np.array([kap]), safe)[0]
        return np.where(r > 0, vals, vals if ell == 0 else 0.0)
    return start


def default_ell_max(kap: float, r) -> int:
    return int(kap * float(np.max(r, initial=0.0)) + EXTRA_WAVES)


def born_term(pot: Potential, k, n: int, points, steps: int | None = None,
              ell_max: int | None = None) -> np.ndarray:
    """phi_0^(n)(k, x) = (-4pi)^{-n} T^n e_k(x)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    kap, pts, r, cosg = _geometry(k, points)
    if n == 0:
        return np.exp(1j * pts @ np.asarray(k, dtype=float))
    if pot.is_zero:
        return np.zeros(len(pts), dtype=complex)
    solver = _solver(pot, kap, steps)
    ell_max = ell_max if ell_max is not None else default_ell_max(kap, np.append(r, pot.support_radius))
    return _series(solver, kap, r, cosg, n, _plane_channel(kap), ell_max)


def born_remainder(pot: Potential, k, N: int, points, steps: int | None = None,
                   ell_max: int | None = None) -> np.ndarray:
    """phi_R^(N)(k, x) = (-4pi)^{-N} T^N phi(k, .)(x)."""
    if N < 0:
        raise ValueError("N must be >= 0")
    kap, pts, r, cosg = _geometry(k, points)
    if pot.is_zero:
        if N == 0:
            return np.exp(1j * pts @ np.asarray(k, dtype=float))
        return np.zeros(len(pts), dtype=complex)
    solver = _solver(pot, kap, steps)
    ell_max = ell_max if ell_max is not None else default_ell_max(kap, np.append(r, pot.support_radius))
    return _series(solver, kap, r, cosg, N, _phi_channel(solver, kap), ell_max)


@dataclass
class BornExpansion:
    order: int
    k: np.ndarray
    points: np.ndarray = field(repr=False)
    terms: list = field(repr=False)
    remainder: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)

    def identity_residual(self) -> float:
        total = np.sum(self.terms, axis=0) + self.remainder
        return float(np.max(np.abs(total - self.phi)) / np.max(np.abs(self.phi)))


def born_expansion(pot: Potential, k, N: int, points, steps: int | None = None) -> BornExpansion:
    """Terms n = 0..N and the remainder of order N+1, plus phi itself."""
    terms = [born_term(pot, k, n, points, steps) for n in range(N + 1)]
    rem = born_remainder(pot, k, N + 1, points, steps)
    phi = born_remainder(pot, k, 0, points, steps)
    return BornExpansion(N, np.asarray(k, float), np.atleast_2d(points), terms, rem, phi)


def first_born_direct(pot: Potential, k, x, n_theta: int = 96, n_phi: int = 64,
                      n_rho: int = 48) -> complex:
    """-(1/4pi) int e^{i|k||x-y|}/|x-y| V(y) e^{iky} dy in spherical coordinates about x.

    V vanishes to all orders at the support boundary, so plain Gauss rules
    along each ray converge quickly.
    """
    k = np.asarray(k, dtype=float)
    kap = np.linalg.norm(k)
    y, rho, w = ray_rule(x, pot.support_radius, n_theta, n_phi, n_rho)
    f = np.exp(1j * kap * rho) * rho * pot.at_points(y) * np.exp(1j * y @ k)
    return complex(-np.sum(w * f) / FOURPI)


# --------------------------------------------------------------------------
# decay probes
# --------------------------------------------------------------------------

def probe_points(R: float, count: int = 50, seed: int = 7) -> np.ndarray:
    """Fixed evaluation set inside |x| <= 2R."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, 3))
    v /= np.linalg.norm(v, axis=1)[:, None]
    radii = 2.0 * R * rng.random(count) ** (1.0 / 3.0)
    return v * radii[:, None]


def log_slope(x, y):
    """Least-squares slope of log y against log x with a 2-sigma band."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    dof = max(len(lx) - 2, 1)
    s2 = float(np.sum((A @ coef - ly) ** 2)) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return float(coef[0]), float(2.0 * np.sqrt(cov[0, 0]))


def remainder_decay_fit(pot: Potential, p: int, k_magnitudes, direction=(0.0, 0.0, 1.0),
                        points=None, steps: int | None = None) -> dict:
    """Decay exponent of sup_x |phi_R^(p)(k, x)| in |k| (exponent = -slope)."""
    ks = np.asarray(k_magnitudes, dtype=float)
    if len(ks) < 5:
        raise InsufficientRange("need at least 5 momentum magnitudes")
    direction = np.asarray(direction, float) / np.linalg.norm(direction)
    pts = points if points is not None else probe_points(pot.support_radius)
    sups = np.array([np.max(np.abs(born_remainder(pot, kk * direction, p, pts, steps))) for kk in ks])
    slope, band = log_slope(ks, sups)
    return {"p": p, "k": ks.tolist(), "sup": sups.tolist(), "slope": slope, "band": band,
            "exponent": -slope, "expected": (p - 1) // 2}


def bump3(center=(0.0, 0.0, 0.0), radius: float = 1.0):
    """exp(1 - 1/(1 - |x-c|^2/a^2)) inside the ball, zero outside."""
    c = np.asarray(center, dtype=float)

    def g(x):
        s = np.sum((np.asarray(x) - c) ** 2, axis=-1) / radius**2
        out = np.zeros(s.shape)
        inside = s < 1
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        return out
    g.center, g.radius = c, radius
    return g


def cartesian_grid(center, half_width: float, step: float):
    c = np.asarray(center, dtype=float)
    t = np.arange(-half_width, half_width + 0.5 * step, step)
    X = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)
    return X + c, step**3


def fourier_cartesian(g, k, center, half_width: float, step: float) -> complex:
    """int e^{ixk} g(x) dx by the trapezoid rule (spectrally accurate for compact smooth g)."""
    X, w = cartesian_grid(center, half_width, step)
    return complex(w * np.sum(np.exp(1j * X @ np.asarray(k, float)) * g(X)))


def fourier_radial(g_radial, k: float, radius: float, order: int = 16, panels: int = 64) -> float:
    """4 pi int_0^a g(r) sin(kr)/(kr) r^2 dr: the same integral for a centred radial g."""
    r, w = gauss_panels(np.linspace(0.0, radius, panels + 1), order)
    return float(4.0 * np.pi * np.sum(w * g_radial(r) * r**2 * np.sinc(k * r / np.pi)))


def derivative_l1_norms(g, center, half_width: float, step: float, n: int) -> float:
    """sup over |alpha| <= n of ||D^alpha g||_1, with central differences on the grid."""
    X, w = cartesian_grid(center, half_width, step)
    vals = g(X)
    best = w * np.sum(np.abs(vals))
    layer = {(): vals}
    for _ in range(n):
        nxt = {}
        for key, arr in layer.items():
            for ax in range(3):
                nk = tuple(sorted(key + (ax,)))
                if nk not in nxt:
                    nxt[nk] = np.gradient(arr, step, axis=ax)
        layer = nxt
        best = max(best, max(w * np.sum(np.abs(a)) for a in layer.values()))
    return float(best)


def upper_envelope(values) -> np.ndarray:
    """Running maximum taken from the right: the smallest non-increasing majorant."""
    v = np.asarray(values, dtype=float)
    return np.maximum.accumulate(v[::-1])[::-1]


def stationary_phase_probe(g, n: int, k_magnitudes, direction=(1.0, 2.0, 2.0),
                           step: float = 0.03) -> dict:
    """Slope of the upper envelope of log|int e^{ixk} g| against log<k>, plus the bound constant."""
    direction = np.asarray(direction, float) / np.linalg.norm(direction)
    ks = np.asarray(k_magnitudes, dtype=float)
    hw = g.radius
    vals = np.array([abs(fourier_cartesian(g, kk * direction, g.center, hw, step)) for kk in ks])
    env = upper_envelope(vals)
    jk = np.sqrt(1.0 + ks**2)
    slope, band = log_slope(jk, env)
    const = derivative_l1_norms(g, g.center, hw, step, n)
    ratio = float(np.max(vals * jk**n) / const)
    return {"n": n, "k": ks.tolist(), "values": vals.tolist(), "slope": slope, "band": band,
            "bound_constant": const, "max_ratio_to_bound": ratio}


def inner_product_decay_probe(pot: Potential, chi, p: int, m: int, n: int, pairs,
                              grid=None) -> dict:
    """sup over pairs of |<phi_0^(p)(k), chi phi_0^(m)(k')>| (1 + |k-k'|^n) and its trend.

    ``chi`` is a callable of points supported in the ball covered by ``grid``
    (a SphericalGrid).
    """
    from .quadrature import spherical_grid
    if p > 3 or m > 3 or n > 4:
        raise ValueError("need p, m <= 3 and n <= 4")
    g = grid if grid is not None else spherical_grid(getattr(chi, "radius", 2.0), 12, 8, 71)
    pts = g.points.reshape(-1, 3)
    w = (g.weights * g.sample(chi)).ravel()
    gaps, vals = [], []
    for k, kp in pairs:
        a = born_term(pot, k, p, pts)
        b = born_term(pot, kp, m, pts)
        val = complex(np.sum(w * np.conj(a) * b))
        gap = float(np.linalg.norm(np.asarray(k, float) - np.asarray(kp, float)))
        gaps.append(gap)
        vals.append(abs(val))
    gaps, vals = np.array(gaps), np.array(vals)
    prod = vals * (1.0 + gaps**n)
    big = gaps >= 1.0
    trend = log_slope(gaps[big], prod[big])[0] if big.sum() >= 3 else float("nan")
    return {"p": p, "m": m, "n": n, "gaps": gaps.tolist(), "values": vals.tolist(),
            "bound_constant": float(prod.max()), "trend_slope": trend}
