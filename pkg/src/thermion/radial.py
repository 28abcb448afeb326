"""Partial-wave engine for radial potentials.

Regular radial solutions come from batched Numerov integration on a uniform
grid covering the support, matched to Riccati-Bessel functions outside.  The
outgoing scattering state is

    phi(k, x) = sum_l (2l+1) i^l R_l(|k|, r) P_l(k_hat . x_hat),
    R_l = exp(i delta_l) u_l(r) / (k r),

with u_l -> sin(kr - l pi/2 + delta_l) outside the support.  The radial
channel of the Helmholtz operator T is applied with cumulative quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.special import spherical_jn, spherical_yn, spherical_kn, eval_legendre
from scipy.optimize import brentq

from . import kernels

TINY = 1e-250


def riccati_j(ell, z):
    return z * spherical_jn(ell, z)


def riccati_y(ell, z):
    return z * spherical_yn(ell, z)


def _origin(ell):
    # (1 - h^2 f/12) u -> -u_1/6 at r = 0 when l = 1 (u ~ r^2); zero otherwise
    return -1.0 / 6.0 if ell == 1 else 0.0


def legendre_table(ell_max: int, x):
    """P_0..P_ell_max at x by the three-term recurrence, shape (ell_max+1,) + x.shape."""
    x = np.asarray(x, dtype=float)
    out = np.empty((ell_max + 1,) + x.shape)
    out[0] = 1.0
    if ell_max >= 1:
        out[1] = x
    for n in range(1, ell_max):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


def _cumulative(f, r):
    # cumulative_simpson drops imaginary parts, so integrate them separately
    if np.iscomplexobj(f):
        return (cumulative_simpson(f.real, x=r, axis=-1, initial=0.0)
                + 1j * cumulative_simpson(f.imag, x=r, axis=-1, initial=0.0))
    return cumulative_simpson(f, x=r, axis=-1, initial=0.0)


def spherical_jn_table(ell_max: int, z) -> np.ndarray:
    """j_0..j_ell_max at z (z >= 0), shape (ell_max+1,) + z.shape.

    Upward recurrence where z >= ell_max (stable there); elsewhere Miller's
    downward recurrence normalised against j_0 and j_1.
    """
    z = np.asarray(z, dtype=float)
    out = np.zeros((ell_max + 1,) + z.shape)
    up = z >= max(ell_max, 1)
    zu = z[up]
    if zu.size:
        a, b = np.sin(zu) / zu, np.sin(zu) / zu**2 - np.cos(zu) / zu
        out[0][up] = a
        if ell_max >= 1:
            out[1][up] = b
        for n in range(1, ell_max):
            a, b = b, (2 * n + 1) / zu * b - a
            out[n + 1][up] = b
    low = ~up & (z > 0)
    zl = z[low]
    if zl.size:
        start = ell_max + 20 + int(np.sqrt(40.0 * max(ell_max, 1)))
        f_next = np.zeros_like(zl)
        f = np.full_like(zl, 1e-300)
        vals = np.zeros((ell_max + 1, zl.size))
        for n in range(start, 0, -1):
            f_prev = (2 * n + 1) / zl * f - f_next
            f_next, f = f, f_prev
            if n - 1 <= ell_max:
                vals[n - 1] = f
            big = np.abs(f) > 1e200
            if big.any():
                f[big] *= 1e-200
                f_next[big] *= 1e-200
                vals[:, big] *= 1e-200
        j0 = np.sin(zl) / zl
        j1 = np.sin(zl) / zl**2 - np.cos(zl) / zl
        f1 = vals[1] if ell_max >= 1 else (3.0 / zl * vals[0] - f_next)
        m = np.maximum(np.abs(vals[0]), np.abs(f1))
        a, b = vals[0] / m, f1 / m
        scale = (j0 * a + j1 * b) / (a * a + b * b) / m
        out[:, low] = vals * scale
    zero = z == 0
    out[0][zero] = 1.0
    return out


def spherical_yn_table(ell_max: int, z) -> np.ndarray:
    """y_0..y_ell_max at z > 0 by upward recurrence (stable; may overflow to inf)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((ell_max + 1,) + z.shape)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        a = -np.cos(z) / z
        b = -np.cos(z) / z**2 - np.sin(z) / z
        out[0] = a
        if ell_max >= 1:
            out[1] = b
        for n in range(1, ell_max):
            a, b = b, (2 * n + 1) / z * b - a
            out[n + 1] = b
    return out


def _lagrange_uniform(values, h: float, x, order: int = 6):
    """Interpolate rows of ``values`` (on 0, h, 2h, ...) at points x with a local Lagrange stencil."""
    n = values.shape[-1]
    x = np.asarray(x, dtype=float)
    base = np.clip(np.floor(x / h).astype(int) - order // 2 + 1, 0, n - order)
    idx = base[:, None] + np.arange(order)[None, :]
    t = x[:, None] / h - idx  # offsets from each stencil node, in steps
    w = np.ones_like(t)
    for j in range(order):
        for m in range(order):
            if m != j:
                w[:, j] *= t[:, m] / (j - m)
    return np.einsum("kpo,po->kp", values[:, idx], w)


@dataclass
class Channel:
    """Regular solutions of one partial wave on the solver grid."""

    ell: int
    k: np.ndarray
    u: np.ndarray  # (nk, npts), normalised to unit asymptotic amplitude
    delta: np.ndarray


class RadialSolver:
    """Numerov-based radial solutions for a radial potential ``V(r)`` supported in r <= R."""

    def __init__(self, V, R: float, steps: int = 2000, match_gap: float = 0.25):
        self.V = V
        self.R = float(R)
        self.h = self.R / steps
        self.n_in = steps
        self.n_gap = max(4, int(round(match_gap / self.h)))
        npts = steps + self.n_gap + 1
        self.r = self.h * np.arange(npts)
        v = np.asarray(V(self.r), dtype=float)
        v[self.r >= self.R] = 0.0
        self.v = v

    # ------------------------------------------------------------------ helpers
    def _q(self, ell):
        q = self.v.copy()
        q[1:] += ell * (ell + 1) / self.r[1:] ** 2
        q[0] = 0.0
        return q

    def solve(self, ell: int, k) -> Channel:
        k = np.atleast_1d(np.asarray(k, dtype=float))
        u = kernels.numerov_batch(self._q(ell), k**2, self.h, 1.0, _origin(ell))
        i1, i2 = self.n_in, self.n_in + self.n_gap
        r1, r2 = self.r[i1], self.r[i2]
        j1, j2 = riccati_j(ell, k * r1), riccati_j(ell, k * r2)
        y1, y2 = riccati_y(ell, k * r1), riccati_y(ell, k * r2)
        u1 = u[:, i1].copy()
        ok = (np.abs(u1) > 0) & (np.abs(j1) > TINY) & np.isfinite(y1)
        ratio = np.where(ok, u[:, i2] / np.where(ok, u1, 1.0), 0.0)
        det = j1 * y2 - j2 * y1
        # u / u1 = a j - b y with a ~ cos(delta), b ~ sin(delta)
        a = (y2 - ratio * y1) / det
        b = (j2 - ratio * j1) / det
        amp = np.hypot(a, b)
        delta = np.arctan2(b, a)
        scale = np.where(ok, 1.0 / (np.where(ok, u1, 1.0) * np.where(ok, amp, 1.0)), 0.0)
        u = u * scale[:, None]
        if not ok.all():
            # potential invisible in this channel: free solution
            bad = ~ok
            u[bad] = riccati_j(ell, k[bad, None] * self.r[None, :])
            delta[bad] = 0.0
        return Channel(ell, k, u, delta)

    def phase_shift(self, ell: int, k):
        return self.solve(ell, k).delta

    def radial_function(self, ell: int, k, r, channel: Channel | None = None):
        """R_l(k, r) for every k (rows) and r (columns), complex."""
        ch = channel if channel is not None else self.solve(ell, k)
        k = ch.k
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty((len(k), len(r)), dtype=complex)
        phase = np.exp(1j * ch.delta)[:, None]
        inside = r < self.R
        if inside.any():
            spl = CubicSpline(self.r, ch.u, axis=1)
            ri = r[inside]
            uu = spl(ri)
            out[:, inside] = phase * uu / (k[:, None] * ri[None, :])
        if (~inside).any():
            ro = r[~inside]
            z = k[:, None] * ro[None, :]
            c, s = np.cos(ch.delta)[:, None], np.sin(ch.delta)[:, None]
            out[:, ~inside] = phase * (c * spherical_jn(ell, z) - s * spherical_yn(ell, z))
        return out

    def radial_functions(self, ell_max: int, k, r):
        """Yield R_l(k, r) (complex, (nk, nr)) for l = 0..ell_max with shared Bessel tables."""
        k = np.atleast_1d(np.asarray(k, dtype=float))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        inside = r < self.R
        ro = r[~inside]
        z = k[:, None] * ro[None, :]
        jt = spherical_jn_table(ell_max, z)
        yt = spherical_yn_table(ell_max, z)
        ri = r[inside]
        for ell in range(ell_max + 1):
            ch = self.solve(ell, k)
            out = np.empty((len(k), len(r)), dtype=complex)
            phase = np.exp(1j * ch.delta)[:, None]
            if inside.any():
                uu = _lagrange_uniform(ch.u, self.h, ri)
                out[:, inside] = phase * uu / (k[:, None] * ri[None, :])
            if (~inside).any():
                c, s = np.cos(ch.delta)[:, None], np.sin(ch.delta)[:, None]
                with np.errstate(invalid="ignore", over="ignore"):
                    sy = np.where(s == 0.0, 0.0, s * yt[ell])
                out[:, ~inside] = phase * (c * jt[ell] - np.nan_to_num(sy, posinf=0.0, neginf=0.0))
            yield out

    # --------------------------------------------------------- helmholtz channel
    def t_channel(self, ell: int, kappa: float, a, r_out=None):
        """Radial channel of T_{V,kappa} applied to a(r) sampled on ``self.r``.

        (T a)(r) = 4 pi i kappa [h_l(kr) int_0^r j_l V a r'^2 + j_l(kr) int_r^R h_l V a r'^2].
        Returns values on the solver grid, or at ``r_out`` when given.
        """
        n = self.n_in + 1
        r = self.r[:n]
        a = np.asarray(a)[..., :n]
        z = kappa * r
        jl = spherical_jn(ell, z)
        live = np.abs(jl) > 1e-200
        live[0] = False  # y_l is singular at the origin, where the r^2 weight kills it anyway
        yl = np.zeros_like(z)
        with np.errstate(over="ignore", invalid="ignore"):
            yl[live] = spherical_yn(ell, z[live])
        vr2 = self.v[:n] * r**2
        gj = jl * vr2 * a
        gy = np.where(live, yl, 0.0) * vr2 * a
        Cj = _cumulative(gj, r)
        Cy = _cumulative(gy, r)
        Cjtot = Cj[..., -1:]
        Ch_tot = Cjtot + 1j * Cy[..., -1:]
        Ch = Cj + 1j * Cy
        pref = 4j * np.pi * kappa
        if r_out is None:
            hl = jl + 1j * yl
            out = np.where(live, hl * Cj, 0.0) + jl * (Ch_tot - Ch)
            return pref * out
        r_out = np.atleast_1d(np.asarray(r_out, dtype=float))
        zo = kappa * r_out
        jo = spherical_jn(ell, zo)
        out = np.zeros(a.shape[:-1] + r_out.shape, dtype=complex)
        ext = r_out >= self.R
        if ext.any():
            ho = jo[ext] + 1j * spherical_yn(ell, zo[ext])
            out[..., ext] = ho * Cjtot
        if (~ext).any():
            ri = r_out[~ext]
            cj = CubicSpline(r, Cj, axis=-1)(ri)
            ch = CubicSpline(r, Ch, axis=-1)(ri)
            ji = jo[~ext]
            alive = np.abs(ji) > 1e-200
            yi = np.zeros_like(ri)
            with np.errstate(over="ignore", invalid="ignore"):
                yi[alive] = spherical_yn(ell, zo[~ext][alive])
            term = np.where(alive, (ji + 1j * yi) * cj, 0.0) + ji * (Ch_tot - ch)
            out[..., ~ext] = term
        return pref * out

    # ------------------------------------------------------------- bound states
    def _bound_mismatch(self, ell, E):
        q = self._q(ell)
        u = kernels.numerov_batch(q, np.array([E]), self.h, 1.0, _origin(ell))[0]
        i1, i2 = self.n_in, self.n_in + self.n_gap
        kap = np.sqrt(-E)
        w1 = self.r[i1] * spherical_kn(ell, kap * self.r[i1])
        w2 = self.r[i2] * spherical_kn(ell, kap * self.r[i2])
        # compare u2/u1 with the decaying exterior ratio; cross form stays finite
        return (u[i2] * w1 - u[i1] * w2) / np.hypot(u[i1], u[i2]) / np.hypot(w1, w2), u

    def bound_state(self, ell: int, E_guess: float, window: float | None = None):
        """Refine a bound-state energy by shooting; returns (E, u_interior, amplitude)."""
        f = lambda E: self._bound_mismatch(ell, E)[0]
        width = window if window is not None else max(1e-3, 0.02 * abs(E_guess))
        lo, hi = E_guess - width, min(E_guess + width, -1e-12)
        flo, fhi = f(lo), f(hi)
        tries = 0
        while flo * fhi > 0 and tries < 30:
            width *= 1.6
            lo, hi = E_guess - width, min(E_guess + width, -1e-12)
            flo, fhi = f(lo), f(hi)
            tries += 1
        if flo * fhi > 0:
            raise RuntimeError(f"no sign change bracketing the bound state near {E_guess}")
        E = brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
        _, u = self._bound_mismatch(ell, E)
        return E, u
