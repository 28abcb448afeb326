"""Quadrature rules: Gauss panels, sphere rules and the product grids built on them.

All grids are immutable dataclasses holding plain numpy arrays.  Sphere rules
integrate over the unit sphere with total weight 4*pi.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import lebedev_rule
from scipy.spatial.transform import Rotation

# degrees of the scipy Lebedev rules with all weights positive (13, 25, 27 are not)
LEBEDEV_DEGREES = (3, 5, 7, 9, 11, 15, 17, 19, 21, 23, 29, 31, 35,
                   41, 47, 53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119,
                   125, 131)


@dataclass(frozen=True)
class SphereRule:
    points: np.ndarray  # (n, 3) unit vectors
    weights: np.ndarray  # (n,), sum 4*pi
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)

    def rotated(self, rotation: np.ndarray) -> "SphereRule":
        return SphereRule(self.points @ np.asarray(rotation).T, self.weights, self.degree)


@lru_cache(maxsize=None)
def _lebedev(degree: int):
    x, w = lebedev_rule(degree)
    return np.ascontiguousarray(x.T), np.ascontiguousarray(w)


def sphere_rule(degree: int = 7) -> SphereRule:
    """Lebedev rule exact for spherical polynomials up to ``degree``.

    The requested degree is rounded up to the next available rule.
    Degree 7 gives the 26-point rule.
    """
    for d in LEBEDEV_DEGREES:
        if d >= degree:
            pts, w = _lebedev(d)
            return SphereRule(pts.copy(), w.copy(), d)
    raise ValueError(f"no sphere rule of degree {degree}")


def random_rotation(seed: int) -> np.ndarray:
    return Rotation.random(random_state=np.random.default_rng(seed)).as_matrix()


@lru_cache(maxsize=None)
def _gauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def gauss_interval(a: float, b: float, order: int):
    x, w = _gauss(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_panels(breaks, order: int):
    """Composite Gauss-Legendre rule over consecutive break points."""
    breaks = np.asarray(breaks, dtype=float)
    x, w = _gauss(order)
    half = 0.5 * np.diff(breaks)
    nodes = breaks[:-1, None] + half[:, None] * (x[None, :] + 1.0)
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def ball_self_integral(radius, kappa: float = 0.0):
    """Integral of exp(i kappa |y|)/|y| over a ball of the given radius."""
    a = np.asarray(radius, dtype=float)
    if kappa == 0.0:
        return (2.0 * np.pi * a**2).astype(complex)
    z = kappa * a
    small = np.abs(z) < 1e-3
    out = np.empty(a.shape, dtype=complex)
    zz = z[~small]
    out[~small] = 4.0 * np.pi * (np.exp(1j * zz) * (1.0 - 1j * zz) - 1.0) / kappa**2
    # series: 4 pi a^2 (1/2 + i z/3 - z^2/8 + ...)
    zs = z[small]
    out[small] = 4.0 * np.pi * a[small] ** 2 * (0.5 + 1j * zs / 3.0 - zs**2 / 8.0 - 1j * zs**3 / 30.0)
    return out


def ray_rule(x, R: float, n_theta: int = 96, n_phi: int = 64, n_rho: int = 48, panels: int = 4):
    """Quadrature over the ball |y| < R in spherical coordinates centred at x.

    Returns (y, rho, w) with y = x + rho * omega and weights w for
    d(omega) d(rho); the caller supplies the rho^2 Jacobian (which is what
    cancels a 1/|x - y| singularity).  The polar axis points from x to the
    origin and, for x outside the ball, is cut at the tangent cone.
    """
    x = np.asarray(x, dtype=float)
    d = float(np.linalg.norm(x))
    axis = -x / d if d > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    theta_max = np.pi if d < R else np.arcsin(min(R / d, 1.0))
    th, wth = gauss_panels(np.linspace(0.0, theta_max, panels + 1), max(1, n_theta // panels))
    ph = 2.0 * np.pi * np.arange(n_phi) / n_phi
    ct, st = np.cos(th)[:, None, None], np.sin(th)[:, None, None]
    dirs = (ct * axis + st * (np.cos(ph)[None, :, None] * e1 + np.sin(ph)[None, :, None] * e2)).reshape(-1, 3)
    wdir = (wth[:, None] * np.sin(th)[:, None] * np.full(n_phi, 2.0 * np.pi / n_phi)[None, :]).ravel()
    b = dirs @ x
    disc = np.maximum(b * b - d * d + R * R, 0.0)
    lo = np.maximum(0.0, -b - np.sqrt(disc))
    hi = np.maximum(lo, -b + np.sqrt(disc))
    t, wt = gauss_panels(np.linspace(0.0, 1.0, panels + 1), max(1, n_rho // panels))
    rho = lo[:, None] + (hi - lo)[:, None] * t[None, :]
    w = wdir[:, None] * (hi - lo)[:, None] * wt[None, :]
    y = x + rho[..., None] * dirs[:, None, :]
    return y.reshape(-1, 3), rho.ravel(), w.ravel()


@dataclass(frozen=True)
class SupportGrid:
    """Volume rule on the ball of radius R: radial Gauss nodes times a sphere rule."""

    nodes: np.ndarray  # (N, 3)
    weights: np.ndarray  # (N,)
    diagonal_correction: np.ndarray  # (N,) static self-cell integral of 1/|y|
    radius: float
    n_radial: int
    sphere: SphereRule

    @property
    def size(self) -> int:
        return len(self.weights)

    @property
    def effective_radius(self) -> np.ndarray:
        return (3.0 * self.weights / (4.0 * np.pi)) ** (1.0 / 3.0)

    def self_cell(self, kappa: float) -> np.ndarray:
        return ball_self_integral(self.effective_radius, kappa)

    def refined(self) -> "SupportGrid":
        return support_grid(self.radius, int(round(1.25 * self.n_radial)),
                            _next_degree(self.sphere.degree))


def _next_degree(d: int) -> int:
    i = LEBEDEV_DEGREES.index(d)
    return LEBEDEV_DEGREES[min(i + 1, len(LEBEDEV_DEGREES) - 1)]


def support_grid(R: float, n_radial: int = 24, sphere_degree: int = 7) -> SupportGrid:
    if R <= 0 or n_radial < 1:
        raise ValueError("support grid needs R > 0 and at least one radial node")
    r, wr = gauss_interval(0.0, R, n_radial)
    sph = sphere_rule(sphere_degree)
    nodes = (r[:, None, None] * sph.points[None, :, :]).reshape(-1, 3)
    weights = (wr[:, None] * r[:, None] ** 2 * sph.weights[None, :]).ravel()
    reff = (3.0 * weights / (4.0 * np.pi)) ** (1.0 / 3.0)
    return SupportGrid(nodes, weights, 2.0 * np.pi * reff**2, float(R), n_radial, sph)


@dataclass(frozen=True)
class SphericalGrid:
    """Product rule on a ball: radial panels times a sphere rule (evaluation grid)."""

    r: np.ndarray  # (nr,)
    r_weights: np.ndarray  # (nr,) weights for dr (no r^2)
    sphere: SphereRule

    @property
    def shape(self):
        return (len(self.r), self.sphere.size)

    @property
    def points(self) -> np.ndarray:
        return self.r[:, None, None] * self.sphere.points[None, :, :]

    @property
    def weights(self) -> np.ndarray:
        """Volume weights, shape (nr, nang)."""
        return (self.r_weights * self.r**2)[:, None] * self.sphere.weights[None, :]

    def sample(self, f) -> np.ndarray:
        pts = self.points.reshape(-1, 3)
        return np.asarray(f(pts)).reshape(self.shape)

    def norm(self, values) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(values) ** 2)))

    def inner(self, a, b) -> complex:
        return complex(np.sum(self.weights * np.conj(a) * b))


def spherical_grid(r_max: float, n_panels: int = 16, order: int = 8,
                   sphere_degree: int = 17, r_split=None) -> SphericalGrid:
    """Evaluation grid on the ball of radius ``r_max``.

    ``r_split`` adds a break point (typically the potential's support radius) so
    the kinks of interpolated radial data fall on panel edges.
    """
    if r_split is not None and 0 < r_split < r_max:
        n_in = max(2, int(round(n_panels * r_split / r_max)) + 2)
        n_out = max(2, n_panels - n_in + 2)
        breaks = np.concatenate([np.linspace(0.0, r_split, n_in + 1),
                                 np.linspace(r_split, r_max, n_out + 1)[1:]])
    else:
        breaks = np.linspace(0.0, r_max, n_panels + 1)
    r, w = gauss_panels(breaks, order)
    return SphericalGrid(r, w, sphere_rule(sphere_degree))


@dataclass(frozen=True)
class KGrid:
    """Momentum-space rule: positive radial nodes times a sphere rule.

    ``radial_weights`` integrate in dk; the k^2 Jacobian is applied by
    ``measure``.
    """

    radial: np.ndarray
    radial_weights: np.ndarray
    sphere: SphereRule
    breaks: np.ndarray = field(repr=False)
    order: int = 6

    @property
    def shape(self):
        return (len(self.radial), self.sphere.size)

    @property
    def measure(self) -> np.ndarray:
        """Weights for d^3k on the (radial, angular) product, shape (na, nb)."""
        return (self.radial_weights * self.radial**2)[:, None] * self.sphere.weights[None, :]

    @property
    def nodes(self) -> np.ndarray:
        return self.radial[:, None, None] * self.sphere.points[None, :, :]

    def max_energy_spacing(self, lo: float, hi: float) -> float:
        """Largest gap in k^2 between neighbouring radial nodes inside [lo, hi]."""
        e = self.radial**2
        sel = (e >= lo) & (e <= hi)
        if sel.sum() < 2:
            # the window falls between two nodes
            idx = np.searchsorted(e, [lo, hi])
            i0, i1 = max(idx[0] - 1, 0), min(idx[1], len(e) - 1)
            return float(np.max(np.diff(e[i0:i1 + 1]))) if i1 > i0 else np.inf
        ee = e[sel]
        return float(np.max(np.diff(ee)))

    def refined(self) -> "KGrid":
        b = self.breaks
        mids = 0.5 * (b[1:] + b[:-1])
        nb = np.sort(np.concatenate([b, mids]))
        r, w = gauss_panels(nb, self.order)
        return KGrid(r, w, sphere_rule(self.sphere.degree), nb, self.order)

    def with_sphere(self, sphere: SphereRule) -> "KGrid":
        return KGrid(self.radial, self.radial_weights, sphere, self.breaks, self.order)


def k_grid(k_max: float = 12.0, panel_width: float = 0.25, order: int = 6,
           sphere_degree: int = 17, fine_energy: float = 0.0,
           energy_step: float = 0.1) -> KGrid:
    """Composite Gauss rule on (0, k_max].

    Panels are at most ``panel_width`` long in k.  Where k^2 < fine_energy the
    panels are additionally limited to ``energy_step`` in k^2, which resolves
    Lorentzian shells of width ~ energy_step.
    """
    breaks = [0.0]
    k = 0.0
    while k < k_max - 1e-12:
        step = panel_width
        if k * k < fine_energy:
            step = min(step, np.sqrt(k * k + energy_step) - k)
        k = min(k + step, k_max)
        breaks.append(k)
    breaks = np.asarray(breaks)
    r, w = gauss_panels(breaks, order)
    return KGrid(r, w, sphere_rule(sphere_degree), breaks, order)
