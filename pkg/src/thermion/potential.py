"""Smooth compactly supported radial wells and their bound states."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import spherical_kn, eval_legendre
from scipy.interpolate import CubicSpline

from .radial import RadialSolver


class InvalidParameter(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


class ResonanceWarning(UserWarning):
    pass


def _rise(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(over="ignore"):  # subnormal t: exp(-inf) = 0 is the right value
        out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """C-infinity step: 1 for t <= 0, 0 for t >= 1."""
    a, b = _rise(1.0 - np.asarray(t, dtype=float)), _rise(t)
    return a / (a + b)


@dataclass(frozen=True)
class Potential:
    """Radial well V(r) = -depth * S((r - (R - s)) / s), flat bottom inside R - s."""

    depth: float
    support_radius: float
    smoothness: float
    r_grid: np.ndarray = field(repr=False)
    profile: np.ndarray = field(repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.depth == 0.0:
            return np.zeros_like(r)
        s = self.smoothness
        return -self.depth * smooth_step((r - (self.support_radius - s)) / s)

    def at_points(self, x):
        return self(np.linalg.norm(np.asarray(x, dtype=float), axis=-1))

    def sqrt_abs(self, r):
        return np.sqrt(-self(r))

    @property
    def is_zero(self) -> bool:
        return self.depth == 0.0

    def to_json(self) -> str:
        return json.dumps({
            "depth": self.depth, "support_radius": self.support_radius,
            "smoothness": self.smoothness, "n_samples": len(self.r_grid),
            "profile": [float(v) for v in self.profile],
        })

    @classmethod
    def from_json(cls, text: str) -> "Potential":
        d = json.loads(text)
        pot = make_bump_well(d["depth"], d["support_radius"], d["smoothness"], d["n_samples"])
        if not np.allclose(pot.profile, d["profile"], rtol=0, atol=1e-14 * max(1.0, pot.depth)):
            raise InvalidParameter("stored profile does not match its parameters")
        return pot

    def boundary_check(self, h: float = 1e-3) -> float:
        """Largest |V|, |V'|, |V''| (finite differences) at the support boundary, relative to depth."""
        R = self.support_radius
        v = self(np.array([R - 2 * h, R - h, R, R + h, R + 2 * h]))
        d1 = (v[3] - v[1]) / (2 * h)
        d2 = (v[3] - 2 * v[2] + v[1]) / h**2
        return float(max(abs(v[2]), abs(d1), abs(d2)) / max(self.depth, 1e-300))


def make_bump_well(depth: float, R: float, smoothness: float, n_samples: int = 2001) -> Potential:
    if not (depth >= 0 and R > 0 and 0 < smoothness < R):
        raise InvalidParameter(f"need depth >= 0, R > 0, 0 < smoothness < R (got {depth}, {R}, {smoothness})")
    r = np.linspace(0.0, R, n_samples)
    pot = Potential(float(depth), float(R), float(smoothness), r, np.zeros(n_samples))
    prof = pot(r)
    object.__setattr__(pot, "profile", prof)
    return pot


@dataclass(frozen=True)
class BoundState:
    energy: float
    ell: int
    r: np.ndarray = field(repr=False)  # sample radii
    radial_wavefunction: np.ndarray = field(repr=False)  # u(r) = r R(r), int u^2 dr = 1
    decay_rate: float
    fit_residual: float
    residual: float
    energy_fd: float
    _interior: CubicSpline = field(repr=False, default=None)
    _exterior_amp: float = 0.0
    _R: float = 0.0

    def u(self, r):
        """Reduced radial function u(r) at arbitrary radii."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        inside = r < self._R
        out[inside] = self._interior(r[inside])
        kap = np.sqrt(-self.energy)
        ro = r[~inside]
        out[~inside] = self._exterior_amp * ro * spherical_kn(self.ell, kap * ro)
        return out

    def radial(self, r):
        r = np.asarray(r, dtype=float)
        return self.u(r) / r

    def psi(self, x):
        """phi(x) = R(r) Y_l0(x_hat) as a real function of 3-D points (m = 0 member)."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        rr = np.where(r > 0, r, 1.0)
        cos_t = np.where(r > 0, x[..., 2] / rr, 1.0)
        ang = np.sqrt((2 * self.ell + 1) / (4 * np.pi)) * eval_legendre(self.ell, cos_t)
        rad = np.where(r > 0, self.u(rr) / rr, self._origin_value())
        return rad * ang

    def _origin_value(self):
        if self.ell > 0:
            return 0.0
        h = 1e-6
        return float(self.u(np.array([h]))[0] / h)


def _fd_levels(pot: Potential, ell: int, box: float, h: float, tol: float):
    n = int(round(box / h))
    r = h * np.arange(1, n)
    d = 2.0 / h**2 + ell * (ell + 1) / r**2 + pot(r)
    e = -np.ones(n - 2) / h**2
    if pot.is_zero:
        return np.array([]), r, np.zeros((n - 1, 0)), d, e
    w, v = eigh_tridiagonal(d, e, select="v", select_range=(-np.inf, -tol))
    return w, r, v, d, e


def fd_spectrum(pot: Potential, ell: int, box: float, h: float, tol: float):
    """Dirichlet finite-difference levels below -tol for one partial wave."""
    return _fd_levels(pot, ell, box, h, tol)[0]


def discrete_spectrum(pot: Potential, ell_max: int = 2, tol: float = 1e-6,
                      h: float | None = None, steps: int = 2000) -> list[BoundState]:
    """All bound states with E < -tol, sorted by energy.

    Levels come from a tridiagonal finite-difference Hamiltonian in a Dirichlet
    box (6R, doubled until stable) and are then polished by Numerov shooting
    against the exact exterior decay.
    """
    if ell_max < 0:
        raise InvalidParameter("ell_max must be >= 0")
    if pot.is_zero:
        return []
    R = pot.support_radius
    h = h if h is not None else R / 400
    solver = RadialSolver(pot, R, steps=steps)
    states = []
    for ell in range(ell_max + 1):
        box = 6.0 * R
        prev = fd_spectrum(pot, ell, box, h, tol)
        for _ in range(6):
            box *= 2
            cur = fd_spectrum(pot, ell, box, h, tol)
            if len(cur) == len(prev) and np.allclose(cur, prev, atol=max(tol, 1e-9)):
                break
            prev = cur
        else:
            raise NoConvergence(f"box doubling did not stabilise the l={ell} levels")
        fine = fd_spectrum(pot, ell, box, h / 2, tol)
        if len(fine) != len(cur):
            raise NoConvergence(f"level count changed under grid refinement (l={ell})")
        w, r, v, d, e = _fd_levels(pot, ell, box, h / 2, tol)
        for idx, E_fd in enumerate(w):
            res = d * v[:, idx]
            res[:-1] += e * v[1:, idx]
            res[1:] += e * v[:-1, idx]
            resid = float(np.linalg.norm(res - E_fd * v[:, idx]) / np.linalg.norm(v[:, idx]))
            if resid > max(tol, 1e-8) * max(1.0, abs(E_fd)):
                raise NoConvergence(f"eigen-residual {resid:.2e} above tolerance")
            states.append(_polish(pot, solver, ell, float(E_fd), resid))
    states.sort(key=lambda s: s.energy)
    return states


def _polish(pot, solver: RadialSolver, ell: int, E_fd: float, fd_residual: float) -> BoundState:
    E, u_raw = solver.bound_state(ell, E_fd)
    R = pot.support_radius
    i1 = solver.n_in
    kap = np.sqrt(-E)
    amp = u_raw[i1] / (R * spherical_kn(ell, kap * R))
    r_in = solver.r[: i1 + 1]
    u_in = u_raw[: i1 + 1]
    # norm: interior by Simpson on the Numerov grid, exterior by Gauss-Laguerre style panels
    from scipy.integrate import simpson
    from .quadrature import gauss_panels
    n_in = simpson(u_in**2, x=r_in)
    tail_end = R + 60.0 / kap
    ro, wo = gauss_panels(np.linspace(R, tail_end, 241), 8)
    n_out = np.sum(wo * (amp * ro * spherical_kn(ell, kap * ro)) ** 2)
    norm = np.sqrt(n_in + n_out)
    u_in = u_in / norm
    amp = amp / norm
    sign = 1.0 if u_in[np.argmax(np.abs(u_in))] > 0 else -1.0
    u_in, amp = sign * u_in, sign * amp
    spline = CubicSpline(r_in, u_in)
    # sampled wavefunction and envelope fit on the tail
    r_s = np.linspace(0.0, tail_end, 4001)
    st = BoundState(E, ell, r_s, np.zeros_like(r_s), 0.0, 0.0, fd_residual, E_fd, spline, float(amp), R)
    u_s = st.u(r_s)
    tail = (r_s > R + 1.0) & (r_s < R + 1.0 + 10.0 / kap)
    A = np.vstack([np.ones(tail.sum()), -r_s[tail]]).T
    y = np.log(np.abs(u_s[tail]))
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    object.__setattr__(st, "radial_wavefunction", u_s)
    object.__setattr__(st, "decay_rate", float(coef[1]))
    object.__setattr__(st, "fit_residual", resid)
    return st


def bound_state_count(pot: Potential, ell: int = 0, h: float | None = None) -> int:
    if pot.is_zero:
        return 0
    h = h if h is not None else pot.support_radius / 400
    return len(fd_spectrum(pot, ell, 12.0 * pot.support_radius, h, 1e-6))


def zero_energy_regularity(pot: Potential, grid=None, refinements: int = 2,
                           threshold: float = 0.05, rel_tol: float = 0.05):
    """Smallest singular value of Id - L_0 on a sequence of refined support grids.

    Returns a dict with the sigma_min trend and whether the well is accepted
    (stable within rel_tol and above threshold).
    """
    from .scattering import rollnik_operator, sigma_min
    from .quadrature import support_grid
    g = grid if grid is not None else support_grid(pot.support_radius)
    values = []
    for _ in range(refinements + 1):
        values.append(sigma_min(rollnik_operator(pot, 0.0, g), g))
        g = g.refined()
    values = np.asarray(values)
    rel = np.abs(np.diff(values)) / values[:-1]
    stable = bool(np.all(rel <= rel_tol))
    shrinking = bool(np.all(np.diff(values) < 0)) and values[-1] < threshold * 2
    if shrinking:
        warnings.warn(f"sigma_min shrinking under refinement: {values}", ResonanceWarning)
    accepted = stable and bool(values[-1] >= threshold)
    return {"sigma_min": values.tolist(), "relative_change": rel.tolist(),
            "stable": stable, "accepted": accepted}
