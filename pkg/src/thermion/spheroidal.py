"""Two-centre oscillatory integrals in prolate spheroidal coordinates.

    I(x, x', kappa) = int e^{i kappa |x-y|} |x-y|^{n1-1} V(y) e^{i kappa |x'-y|} |x'-y|^{n2-1} dy.

With foci x, x' and D = |x - x'|/2 the coordinates are
xi = (|x-y| + |x'-y|)/2 and eta = (|x-y| - |x'-y|)/(2D), so the phase is
e^{2 i kappa xi} and the volume element (xi + D eta)(xi - D eta) cancels both
singular factors.  I = int_D^inf e^{2i kappa xi} h(xi) d xi with a smooth h that
vanishes for xi >= R + D + E.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .potential import Potential, smooth_step
from .quadrature import gauss_panels, ray_rule


class OutOfDomain(ValueError):
    pass


class AccuracyWarning(UserWarning):
    pass


def rotation_to(u) -> np.ndarray:
    """Orthogonal matrix sending e3 to the unit vector u (Rodrigues form)."""
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    e3 = np.array([0.0, 0.0, 1.0])
    c = float(e3 @ u)
    if c < 0.0:
        # 1 + c is ill-conditioned here: go through -u and a half turn about e1
        return rotation_to(-u) @ np.diag([1.0, -1.0, -1.0])
    v = np.cross(e3, u)
    K = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + K + K @ K / (1.0 + c)


@dataclass(frozen=True)
class ProlateFrame:
    x: np.ndarray
    xp: np.ndarray
    D: float
    E: float
    rotation: np.ndarray
    degenerate: bool

    @property
    def centre(self) -> np.ndarray:
        return 0.5 * (self.x + self.xp)


def prolate_frame(x, xp, atol: float = 1e-14) -> ProlateFrame:
    """Frame with foci x (at -D e3) and x' (at +D e3); x = x' gives spherical coordinates about x."""
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    sep = xp - x
    D = 0.5 * float(np.linalg.norm(sep))
    E = 0.5 * float(np.linalg.norm(x + xp))
    degenerate = D <= atol
    rot = np.eye(3) if degenerate else rotation_to(sep)
    return ProlateFrame(x, xp, 0.0 if degenerate else D, E, rot, degenerate)


def prolate_map(frame: ProlateFrame, xi, eta, phi):
    """Point Phi(xi, eta, phi) and the volume element (xi + D eta)(xi - D eta)."""
    xi, eta, phi = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (xi, eta, phi)))
    D = frame.D
    if np.any(xi < D * (1 - 1e-14)):
        raise OutOfDomain("xi must be >= D")
    if np.any(np.abs(eta) > 1):
        raise OutOfDomain("eta must lie in [-1, 1]")
    perp = np.sqrt(np.maximum(xi**2 - D**2, 0.0) * (1.0 - eta**2))
    local = np.stack([perp * np.cos(phi), perp * np.sin(phi), xi * eta], axis=-1)
    y = frame.centre + local @ frame.rotation.T
    return y, (xi + D * eta) * (xi - D * eta)


def xi_cutoff(pot: Potential, frame: ProlateFrame) -> float:
    return pot.support_radius + frame.D + frame.E


def _eta_windows(frame: ProlateFrame, R: float, xi, samples: int = 801):
    """Per-xi interval of eta whose circle of the ellipsoid meets the ball |y| < R.

    The circle at (xi, eta) has centre p = c + xi eta a and radius perp; its
    closest approach to the origin is sqrt((p.a)^2 + (|c_perp| - perp)^2).
    Windows are padded by one sample so the (flat) edges are covered.
    """
    a = frame.rotation[:, 2]
    ca = float(frame.centre @ a)
    cq = float(np.linalg.norm(frame.centre - ca * a))
    es = np.linspace(-1.0, 1.0, samples)
    X = xi[:, None]
    perp = np.sqrt(np.maximum(X**2 - frame.D**2, 0.0) * (1.0 - es[None, :] ** 2))
    hit = (ca + X * es[None, :]) ** 2 + (cq - perp) ** 2 < R * R
    any_hit = hit.any(axis=1)
    first = np.argmax(hit, axis=1)
    last = samples - 1 - np.argmax(hit[:, ::-1], axis=1)
    lo = es[np.maximum(first - 1, 0)]
    hi = es[np.minimum(last + 1, samples - 1)]
    return np.where(any_hit, lo, 0.0), np.where(any_hit, hi, 0.0)


def profile_h(pot: Potential, frame: ProlateFrame, xi, n1: int, n2: int,
              n_eta: int = 64, n_phi: int = 64, chunk: int = 32) -> np.ndarray:
    """h(xi) = int int |x-y|^{n1} |x'-y|^{n2} V(Phi(xi, eta, phi)) d eta d phi.

    Gauss rules in eta and phi restricted to the part of each ellipsoid that
    meets the support ball; V vanishes to all orders at the window edges.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    R = pot.support_radius
    t, wt = np.polynomial.legendre.leggauss(n_eta)
    s, ws = np.polynomial.legendre.leggauss(n_phi)
    D = frame.D
    a = frame.rotation[:, 2]
    ca = float(frame.centre @ a)
    q = frame.rotation.T @ (frame.centre - ca * a)
    cq = float(np.hypot(q[0], q[1]))
    phi_q = float(np.arctan2(q[1], q[0]))
    lo, hi = _eta_windows(frame, R, xi)
    out = np.zeros(len(xi))
    for st in range(0, len(xi), chunk):
        sl = slice(st, st + chunk)
        live = hi[sl] > lo[sl]
        if not live.any():
            continue
        X = xi[sl][live][:, None]
        half = 0.5 * (hi[sl][live] - lo[sl][live])[:, None]
        eta = lo[sl][live][:, None] + half * (t[None, :] + 1.0)
        weta = half * wt[None, :]
        perp = np.sqrt(np.maximum(X**2 - D**2, 0.0) * (1.0 - eta**2))
        p2 = (ca + X * eta) ** 2 + cq**2
        # inside the ball iff cos(phi - phi_q) < bound
        with np.errstate(divide="ignore", invalid="ignore"):
            bound = (R * R - p2 - perp**2) / (2.0 * perp * cq)
        bound = np.where(perp * cq > 0, bound, np.where(p2 + perp**2 < R * R, 2.0, -2.0))
        width = np.pi - np.arccos(np.clip(bound, -1.0, 1.0))
        width = np.where(bound >= 1.0, np.pi, np.minimum(width + 0.02, np.pi))
        width = np.where(bound <= -1.0, 0.0, width)
        phi = phi_q + np.pi + width[..., None] * s
        wphi = width[..., None] * ws
        Xb = np.broadcast_to(X[..., None], phi.shape)
        Eb = np.broadcast_to(eta[..., None], phi.shape)
        y, _ = prolate_map(frame, Xb, Eb, phi)
        f = (Xb + D * Eb) ** n1 * (Xb - D * Eb) ** n2 * pot.at_points(y)
        vals = np.sum(f * wphi * weta[..., None], axis=(1, 2))
        tmp = np.zeros(live.shape)
        tmp[live] = vals
        out[sl] = tmp
    return out


def xi_rule(D: float, upper: float, kappa_max: float, order: int = 8, max_panel: float = 0.1):
    """Gauss panels on (D, upper) no longer than pi/(4 kappa_max); nodes never touch D."""
    width = min(max_panel, np.pi / (4.0 * max(kappa_max, 1e-12)))
    n = max(1, int(np.ceil((upper - D) / width)))
    return gauss_panels(np.linspace(D, upper, n + 1), order)


def klein_zemach_sweep(pot: Potential, x, xp, kappas, n1: int = 0, n2: int = 0,
                       n_eta: int = 64, n_phi: int = 64, order: int = 12) -> np.ndarray:
    """I for every kappa in ``kappas``, sharing one tabulation of h."""
    kappas = np.atleast_1d(np.asarray(kappas, dtype=float))
    if pot.is_zero:
        return np.zeros(len(kappas), dtype=complex)
    frame = prolate_frame(x, xp)
    xi, w = xi_rule(frame.D, xi_cutoff(pot, frame), float(kappas.max()), order)
    h = profile_h(pot, frame, xi, n1, n2, n_eta, n_phi)
    return np.exp(2j * kappas[:, None] * xi[None, :]) @ (w * h)


def klein_zemach_spheroidal(pot: Potential, x, xp, kappa: float, n1: int = 0, n2: int = 0,
                            **kw) -> complex:
    return complex(klein_zemach_sweep(pot, x, xp, [kappa], n1, n2, **kw)[0])


def _partition(x, xp):
    """Weights (psi, 1 - psi): psi = 1 near x', 0 near x (smooth, compact transition)."""
    d = float(np.linalg.norm(np.asarray(xp) - np.asarray(x)))

    def near_xp(y):
        s = np.linalg.norm(y - xp, axis=-1)
        return smooth_step((s - 0.25 * d) / (0.25 * d))
    return near_xp


def klein_zemach_direct(pot: Potential, x, xp, kappa: float, n1: int = 0, n2: int = 0,
                        n_theta: int = 200, n_phi: int = 200, n_rho: int = 128) -> complex:
    """Direct 3-D quadrature of I.

    A smooth partition of unity splits the integrand into a piece vanishing
    near x' (integrated in spherical coordinates about x) and a piece
    vanishing near x (about x'); in each, the r^2 Jacobian removes the
    remaining singularity.
    """
    x = np.asarray(x, dtype=float)
    xp = np.asarray(xp, dtype=float)
    if pot.is_zero:
        return 0.0j
    R = pot.support_radius
    wavelengths = kappa * 2.0 * R / (2.0 * np.pi)
    if n_rho < 8 * wavelengths:
        warnings.warn(f"kappa = {kappa} beyond the oscillation budget of {n_rho} radial nodes",
                      AccuracyWarning)

    def integrand(y):
        r1 = np.linalg.norm(y - x, axis=-1)
        r2 = np.linalg.norm(y - xp, axis=-1)
        return np.exp(1j * kappa * (r1 + r2)) * r1 ** (n1 - 1.0) * r2 ** (n2 - 1.0) * pot.at_points(y), r1, r2

    if np.linalg.norm(xp - x) <= 1e-14:
        y, rho, w = ray_rule(x, R, n_theta, n_phi, n_rho)
        return complex(np.sum(w * np.exp(2j * kappa * rho) * rho ** (n1 + n2) * pot.at_points(y)))
    near_xp = _partition(x, xp)
    total = 0.0j
    for centre, take_near in ((x, False), (xp, True)):
        y, rho, w = ray_rule(centre, R, n_theta, n_phi, n_rho)
        psi = near_xp(y)
        part = psi if take_near else 1.0 - psi
        keep = part > 0
        f, r1, r2 = integrand(y[keep])
        total += np.sum(w[keep] * part[keep] * rho[keep] ** 2 * f)
    return complex(total)


def decay_sweep(pot: Potential, pairs, kappas, n1: int = 0, n2: int = 0, **kw) -> dict:
    """sup over point pairs of |I| per kappa, kappa * sup|I| and the fitted log slope."""
    from .born import log_slope
    kappas = np.asarray(kappas, dtype=float)
    vals = np.zeros(len(kappas))
    for x, xp in pairs:
        vals = np.maximum(vals, np.abs(klein_zemach_sweep(pot, x, xp, kappas, n1, n2, **kw)))
    slope, band = log_slope(kappas, vals)
    return {"kappa": kappas.tolist(), "sup": vals.tolist(), "kappa_sup": (kappas * vals).tolist(),
            "slope": slope, "band": band}
