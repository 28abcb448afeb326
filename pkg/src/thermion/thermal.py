"""Black-body occupation, the thermal gluing map and infrared classification of couplings.

    rho_b(w) = 1 / (e^{b w} - 1),
    (tau_b f)(u, S) = u sqrt(1 + rho_b(u)) f(u, S)           u > 0,
                    = -u sqrt(rho_b(-u)) conj(f(-u, S))      u < 0.

For couplings behaving like w^{+-1/2} at the origin the glued weight is
written through B(x) = x / (1 - e^{-x}) (x = b u), which is analytic on the
whole real line and covers both branches at once:
u^{1/2} sqrt(1 + rho(u)) = |u|^{1/2} sqrt(rho(|u|)) = b^{-1/2} sqrt(B(b u)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
from scipy.integrate import quad
from scipy.special import bernoulli, eval_hermite

from .quadrature import gauss_panels, sphere_rule, SphereRule


class DomainError(ValueError):
    pass


class RejectedCoupling(ValueError):
    pass


SERIES_BELOW = 1e-4


# --------------------------------------------------------------------------
# rho and its derivatives
# --------------------------------------------------------------------------

def planck(beta: float, omega):
    """1/(e^{beta omega} - 1): expm1 in the bulk, a series for tiny beta*omega, e^{-x} scale when large."""
    w = np.asarray(omega, dtype=float)
    if beta <= 0:
        raise DomainError("beta must be positive")
    if np.any(w <= 0):
        raise DomainError("planck needs omega > 0")
    x = beta * w
    out = np.empty_like(x)
    small = x < SERIES_BELOW
    big = x > 30.0
    mid = ~small & ~big
    xs = x[small]
    out[small] = 1.0 / xs - 0.5 + xs / 12.0 - xs**3 / 720.0
    out[mid] = 1.0 / np.expm1(x[mid])
    e = np.exp(-x[big])
    out[big] = e / (1.0 - e)
    return out if out.ndim else float(out)


def planck_derivatives(beta: float, omega):
    """rho, rho', rho'', rho''' in omega (closed forms through rho itself)."""
    r = np.asarray(planck(beta, omega))
    a = r * (1.0 + r)
    return [r, -beta * a, beta**2 * a * (1.0 + 2.0 * r),
            -beta**3 * a * (1.0 + 6.0 * r + 6.0 * r * r)]


def sqrt_derivatives(v):
    """Derivatives of sqrt(v) up to third order from v, v', v'', v'''."""
    v0, v1, v2, v3 = v
    s = np.sqrt(v0)
    return [s, v1 / (2 * s), v2 / (2 * s) - v1**2 / (4 * s**3),
            v3 / (2 * s) - 3 * v1 * v2 / (4 * s**3) + 3 * v1**3 / (8 * s**5)]


def times_u(u, d):
    """Derivatives of u * g(u) from those of g: (u g)^(l) = u g^(l) + l g^(l-1)."""
    return [u * d[0]] + [u * d[l] + l * d[l - 1] for l in range(1, len(d))]


def emission_weight(beta: float, u):
    """u sqrt(1 + rho(u)) and its first three u-derivatives (u > 0)."""
    rho = planck_derivatives(beta, u)
    one_plus = [1.0 + rho[0]] + rho[1:]
    return times_u(np.asarray(u, float), sqrt_derivatives(one_plus))


def absorption_weight(beta: float, t):
    """t sqrt(rho(t)) and its first three t-derivatives (t = -u > 0)."""
    return times_u(np.asarray(t, float), sqrt_derivatives(planck_derivatives(beta, t)))


_BERN = bernoulli(40).astype(float)
_BERN[1] = 0.5  # x / (1 - e^{-x}) uses B_1 = +1/2


def bose_b(x):
    """B(x) = x/(1 - e^{-x}) and its first three derivatives, for all real x."""
    x = np.asarray(x, dtype=float)
    out = [np.empty_like(x) for _ in range(4)]
    small = np.abs(x) < 0.5
    xs = x[small]
    for d in range(4):
        acc = np.zeros_like(xs)
        for n in range(d, len(_BERN)):
            acc += _BERN[n] * xs ** (n - d) / factorial(n - d)
        out[d][small] = acc
    xl = x[~small]
    # B = x g, g = 1/(1 - e^{-x}) = 1 + rho_1(x); derivatives of g via rho_1
    with np.errstate(over="ignore"):
        r = 1.0 / np.expm1(xl)
    a = r * (1.0 + r)
    g = [1.0 + r, -a, a * (1.0 + 2.0 * r), -a * (1.0 + 6.0 * r + 6.0 * r * r)]
    for d, val in enumerate(times_u(xl, g)):
        out[d][~small] = val
    return out


def smooth_glue_weight(beta: float, u, power: float):
    """Weight and u-derivatives of tau for f = w^power * f~ with power = -1/2 or +1/2.

    power = -1/2: b^{-1/2} sqrt(B(b u)); power = +1/2: |u| times that.
    """
    u = np.asarray(u, dtype=float)
    B = bose_b(beta * u)
    W = sqrt_derivatives(B)
    W = [beta ** (l - 0.5) * W[l] for l in range(4)]
    if power == -0.5:
        return W
    if power == 0.5:
        sgn = np.sign(u)
        return [sgn * v for v in times_u(u, W)]
    raise ValueError("power must be +-1/2")


# --------------------------------------------------------------------------
# bounds on rho and its derivative, with beta-uniform constants
# --------------------------------------------------------------------------

def rho_bounds_check(betas, omegas=None) -> dict:
    """Check sqrt(rho) <= (b w)^{-1/2}, sqrt(1+rho) <= 1 + (b w)^{-1/2} and fit the
    smallest C with |d sqrt(rho)|, |d sqrt(1+rho)| <= C (w^{-1} + b^{-1/2} w^{-3/2})."""
    omegas = np.geomspace(1e-6, 1e3, 2000) if omegas is None else np.asarray(omegas, float)
    violations = []
    consts = {"c": [], "d": []}
    for b in betas:
        rho = planck(b, omegas)
        bw = b * omegas
        sr, s1 = np.sqrt(rho), np.sqrt(1.0 + rho)
        slack = 1e-13
        for name, lhs, rhs in (("a", sr, 1.0 / np.sqrt(bw)), ("b", s1, 1.0 + 1.0 / np.sqrt(bw))):
            bad = np.nonzero(lhs > rhs * (1 + slack))[0]
            violations += [{"item": name, "beta": b, "omega": float(omegas[i])} for i in bad]
        env = 1.0 / omegas + b**-0.5 * omegas**-1.5
        # d sqrt(rho) = -(b/2) sqrt(rho) (1 + rho), d sqrt(1 + rho) = -(b/2) rho sqrt(1 + rho)
        consts["c"].append(float(np.max(0.5 * b * sr * (1.0 + rho) / env)))
        consts["d"].append(float(np.max(0.5 * b * rho * s1 / env)))
    spread = {k: float((max(v) - min(v)) / max(v)) for k, v in consts.items()}
    return {"betas": list(betas), "violations": violations, "constants": consts, "spread": spread}


def detailed_balance_defect(beta: float, u) -> float:
    """max |rho/(1+rho) e^{b u} - 1| over u > 0."""
    rho = planck(beta, u)
    return float(np.max(np.abs(rho / (1.0 + rho) * np.exp(beta * np.asarray(u)) - 1.0)))


# --------------------------------------------------------------------------
# couplings and their infrared class
# --------------------------------------------------------------------------

def fd_derivatives(f, omega, order: int = 3, rel_step: float = 1e-2, max_step: float = 1e-2):
    """Derivatives up to ``order`` by fourth-order central differences with step ~ rel_step*omega."""
    w = np.asarray(omega, dtype=float)
    h = np.minimum(rel_step * w, max_step)
    out = [np.asarray(f(w))]
    stencils = [([-2, -1, 1, 2], [1, -8, 8, -1], 12.0),
                ([-2, -1, 0, 1, 2], [-1, 16, -30, 16, -1], 12.0),
                ([-3, -2, -1, 1, 2, 3], [1, -8, 13, -13, 8, -1], 8.0)]
    for j in range(order):
        offs, coef, den = stencils[j]
        acc = sum(c * np.asarray(f(w + o * h)) for o, c in zip(offs, coef))
        out.append(acc / (den * h ** (j + 1)))
    return out


@dataclass(frozen=True)
class IRClass:
    kind: str  # polynomial | sqrt_plus | sqrt_minus | rejected
    power: float | None = None
    k2: float | None = None

    @property
    def accepted(self) -> bool:
        return self.kind != "rejected"


def classify_ir(kappa, derivs=None, tilde_derivs=None, omegas=None, growth_tol: float = 10.0) -> IRClass:
    """Infrared class of kappa from samples on a geometric grid near 0.

    The exponent p is the log-log slope of |kappa| at the smallest samples.
    polynomial(p) needs p > 2 and |d^j kappa| <= k2 w^{p-j} (j <= 3) with a
    k2 that does not grow toward 0; otherwise w^{-+1/2} is divided out and the
    quotient must have bounded derivatives.
    """
    w = np.geomspace(1e-6, 1e-1, 41) if omegas is None else np.asarray(omegas, float)
    vals = np.abs(np.asarray(kappa(w), dtype=float))
    if np.all(vals == 0):
        return IRClass("polynomial", np.inf, 0.0)
    lo = slice(0, 8)
    p = float(np.polyfit(np.log(w[lo]), np.log(vals[lo]), 1)[0])
    d = derivs(w) if derivs is not None else fd_derivatives(kappa, w)
    if p > 2.0 + 1e-6:
        pr = float(np.round(p)) if abs(p - np.round(p)) < 1e-3 else p - 1e-3
        ratios = [np.abs(d[j]) / w ** (pr - j) for j in range(4)]
        k2 = float(max(r.max() for r in ratios))
        head = max(r[:5].max() for r in ratios)
        tail = max(r[5:].max() for r in ratios)
        if head <= growth_tol * max(tail, 1e-300):
            return IRClass("polynomial", pr, k2)
    for s, kind in ((0.5, "sqrt_plus"), (-0.5, "sqrt_minus")):
        if abs(p - s) > 0.05:
            continue
        if tilde_derivs is not None:
            td = tilde_derivs(w)
        else:
            tilde = lambda x, s=s: np.asarray(kappa(x)) * np.asarray(x, float) ** (-s)
            td = fd_derivatives(tilde, np.maximum(w, 5e-2), rel_step=0.1, max_step=1e-2)
        bound = max(float(np.max(np.abs(t))) for t in td)
        if np.isfinite(bound):
            return IRClass(kind, s, bound)
    return IRClass("rejected", p, None)


def uv_certified(kappa, n_max: int = 8, omegas=None) -> bool:
    """sup_{w >= 1} w^n |kappa| finite on samples and negligible at the top of the grid."""
    w = np.geomspace(1.0, 1e3, 400) if omegas is None else np.asarray(omegas, float)
    k = np.abs(np.asarray(kappa(w), dtype=float))
    for n in range(n_max + 1):
        g = w**n * k
        if not np.all(np.isfinite(g)) or g[-1] > 1e-8 * max(g.max(), 1e-300):
            return False
    return True


@dataclass(frozen=True)
class Coupling:
    """Form factor kappa(w) with derivatives and its infrared/ultraviolet certification."""

    name: str
    kappa: object = field(repr=False)
    derivs: object = field(repr=False, default=None)  # w -> [kappa, kappa', kappa'', kappa''']
    tilde_derivs: object = field(repr=False, default=None)  # for w^{+-1/2} couplings
    ir: IRClass = None
    uv_certified: bool = False

    @property
    def ir_class(self) -> str:
        return self.ir.kind

    def __call__(self, omega):
        return self.kappa(omega)

    def derivatives(self, omega):
        if self.derivs is not None:
            return self.derivs(omega)
        return fd_derivatives(self.kappa, omega)

    def tilde(self, omega):
        """kappa w^{-s} and derivatives for the sqrt classes."""
        if self.tilde_derivs is not None:
            return self.tilde_derivs(omega)
        s = self.ir.power
        return fd_derivatives(lambda x: np.asarray(self.kappa(x)) * np.asarray(x) ** (-s), omega)


def make_coupling(name, kappa, derivs=None, tilde_derivs=None) -> Coupling:
    ir = classify_ir(kappa, derivs, tilde_derivs)
    return Coupling(name, kappa, derivs, tilde_derivs, ir, uv_certified(kappa))


def _gauss_derivs(c: float, C: float):
    """C e^{-c w^2} and its derivatives: (-sqrt c)^n H_n(sqrt c w) C e^{-c w^2}."""
    sc = np.sqrt(c)

    def d(w):
        w = np.asarray(w, dtype=float)
        e = C * np.exp(-c * w * w)
        return [(-sc) ** n * eval_hermite(n, sc * w) * e for n in range(4)]
    return d


def example_coupling(c: float = 1.0, C: float = 1.0) -> Coupling:
    """kappa(w) = C w^{-1/2} e^{-c w^2}."""
    g = _gauss_derivs(c, C)

    def derivs(w):
        w = np.asarray(w, dtype=float)
        t = g(w)
        pw = [w**-0.5, -0.5 * w**-1.5, 0.75 * w**-2.5, -1.875 * w**-3.5]
        return [sum(comb(n, l) * pw[l] * t[n - l] for l in range(n + 1)) for n in range(4)]
    kappa = lambda w: C * np.asarray(w, float) ** -0.5 * np.exp(-c * np.asarray(w, float) ** 2)
    return make_coupling(f"example(c={c},C={C})", kappa, derivs, g)


def power_coupling(p: float, width: float = 2.0) -> Coupling:
    """w^p times a smooth bump supported in [0, width) (derivatives by finite differences)."""
    from .potential import smooth_step

    def kappa(w):
        w = np.asarray(w, dtype=float)
        return w**p * smooth_step(w / width)
    return make_coupling(f"power(p={p})", kappa)


def monomial_coupling(p: float) -> Coupling:
    """w^p e^{-w^2} with analytic derivatives."""
    g = _gauss_derivs(1.0, 1.0)

    def derivs(w):
        w = np.asarray(w, dtype=float)
        t = g(w)
        pw = [w**p, p * w ** (p - 1), p * (p - 1) * w ** (p - 2), p * (p - 1) * (p - 2) * w ** (p - 3)]
        return [sum(comb(n, l) * pw[l] * t[n - l] for l in range(n + 1)) for n in range(4)]
    kappa = lambda w: np.asarray(w, float) ** p * np.exp(-np.asarray(w, float) ** 2)
    return make_coupling(f"monomial(p={p})", kappa, derivs)


# --------------------------------------------------------------------------
# u grids and glued functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UGrid:
    """Symmetric nodes on [-U, U] minus {0} with weights for du."""

    u: np.ndarray
    weights: np.ndarray

    @property
    def positive(self) -> np.ndarray:
        return self.u > 0


def geometric_u_grid(U: float, u_min: float = 1e-12, per_decade: int = 4, order: int = 12) -> UGrid:
    """Gauss panels on geometric breaks between u_min and U, mirrored to u < 0."""
    n = max(1, int(np.ceil(per_decade * np.log10(U / u_min))))
    breaks = np.concatenate([[0.0], np.geomspace(u_min, U, n + 1)])
    x, w = gauss_panels(breaks, order)
    return UGrid(np.concatenate([-x[::-1], x]), np.concatenate([w[::-1], w]))


def uniform_u_grid(U: float, n: int) -> UGrid:
    """Midpoint rule with n cells on each of (-U, 0) and (0, U)."""
    h = U / n
    x = (np.arange(n) + 0.5) * h
    return UGrid(np.concatenate([-x[::-1], x]), np.full(2 * n, h))


def uv_cutoff(coupling: Coupling, beta: float, rel: float = 1e-12, start: float = 1.0) -> float:
    """Smallest U (growing by 1.25 from ``start``) whose tail of w^2 (1 + 2 rho) |kappa|^2 is below rel."""
    g = lambda w: w * w * (1.0 + 2.0 * planck(beta, w)) * abs(coupling(w)) ** 2 if w > 0 else 0.0
    total = quad(g, 0, np.inf, limit=200)[0]
    U = start
    while quad(g, U, np.inf, limit=200)[0] > rel * total and U < 1e3:
        U *= 1.25
    return U


@dataclass(frozen=True)
class GluedFunction:
    beta: float
    grid: UGrid = field(repr=False)
    sphere: SphereRule = field(repr=False)
    values: np.ndarray = field(repr=False)  # (nu, nsigma)

    def norm(self) -> float:
        w = self.grid.weights[:, None] * self.sphere.weights[None, :]
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))


def _as_field(f, u, sphere):
    """Samples f(w, Sigma) on |u| x sphere; f takes (w array, points) or just w."""
    w = np.abs(u)
    try:
        vals = f(w[:, None], sphere.points[None, :, :])
    except TypeError:
        vals = f(w)
    return np.broadcast_to(np.asarray(vals, dtype=complex).reshape(len(u), -1), (len(u), sphere.size))


def glue(f, beta: float, grid: UGrid, sphere: SphereRule | None = None) -> GluedFunction:
    """tau_beta f on the (u, Sigma) nodes from the defining formula."""
    sphere = sphere if sphere is not None else sphere_rule(7)
    u = grid.u
    vals = _as_field(f, u, sphere)
    pos = u > 0
    out = np.empty(vals.shape, dtype=complex)
    up = u[pos]
    out[pos] = (up * np.sqrt(1.0 + planck(beta, up)))[:, None] * vals[pos]
    t = -u[~pos]
    out[~pos] = (t * np.sqrt(planck(beta, t)))[:, None] * np.conj(vals[~pos])
    return GluedFunction(beta, grid, sphere, out)


def glued_norm_identity(coupling: Coupling, beta: float, grid: UGrid) -> dict:
    """||tau f||^2 on the u grid versus 4 pi int w^2 (1 + 2 rho) |kappa|^2 dw by adaptive quadrature."""
    g = glue(lambda w: coupling(w), beta, grid, sphere_rule(3))
    lhs = g.norm() ** 2
    integrand = lambda w: w * w * (1.0 + 2.0 * planck(beta, w)) * abs(coupling(w)) ** 2 if w > 0 else 0.0
    rhs = 4.0 * np.pi * quad(integrand, 0, np.inf, limit=400, epsabs=0, epsrel=1e-13)[0]
    return {"glued": lhs, "direct": rhs, "rel_diff": abs(lhs - rhs) / rhs}


def glued_derivatives(coupling: Coupling, beta: float, u, order: int = 1):
    """d^j/du^j (tau_beta kappa)(u) for j <= order (Sigma-independent kappa)."""
    if not coupling.ir.accepted:
        raise RejectedCoupling(f"coupling {coupling.name} fails the infrared condition")
    u = np.asarray(u, dtype=float)
    out = [np.zeros(len(u), dtype=complex) for _ in range(order + 1)]
    pos = u > 0
    kind = coupling.ir.kind
    if kind in ("sqrt_plus", "sqrt_minus"):
        W = smooth_glue_weight(beta, u, coupling.ir.power)
        t = coupling.tilde(np.abs(u))
        # on u < 0 the factor is conj(f~(-u)): each derivative picks up (-1)^l
        sgn = np.where(pos, 1.0, -1.0)
        ft = [np.where(pos, t[l], np.conj(t[l]) * sgn**l) for l in range(4)]
        for j in range(order + 1):
            out[j] = sum(comb(j, l) * W[l] * ft[j - l] for l in range(j + 1))
        return out
    d = coupling.derivatives(np.abs(u))
    up, t = u[pos], -u[~pos]
    we = emission_weight(beta, up)
    wa = absorption_weight(beta, t)
    for j in range(order + 1):
        out[j][pos] = sum(comb(j, l) * we[l] * d[j - l][pos] for l in range(j + 1))
        # w(u) = W(-u), F(u) = conj f(-u): the product picks up (-1)^j overall
        out[j][~pos] = (-1.0) ** j * sum(comb(j, l) * wa[l] * np.conj(d[j - l][~pos]) for l in range(j + 1))
    return out


def glued_derivative_norms(coupling: Coupling, beta: float, m: int = 1, grid: UGrid | None = None) -> dict:
    """L^2(R x S^2) norms of d^j tau_beta(kappa), j <= m, and norm/(1 + 1/beta) for j <= 1."""
    if grid is None:
        grid = geometric_u_grid(uv_cutoff(coupling, beta))
    ders = glued_derivatives(coupling, beta, grid.u, m)
    norms = [float(np.sqrt(4.0 * np.pi * np.sum(grid.weights * np.abs(d) ** 2))) for d in ders]
    return {"beta": beta, "norms": norms, "ratios": [n / (1.0 + 1.0 / beta) for n in norms[:2]]}


def beta_uniformity(coupling: Coupling, betas=(0.25, 1.0, 4.0), m: int = 1) -> dict:
    """Spread (max - min)/max of norm/(1 + 1/beta) over the beta set, per derivative order."""
    rows = [glued_derivative_norms(coupling, b, m) for b in betas]
    spreads = []
    for j in range(min(m, 1) + 1):
        r = [row["ratios"][j] for row in rows]
        spreads.append(float((max(r) - min(r)) / max(r)))
    return {"betas": list(betas), "rows": rows, "spread": spreads}
