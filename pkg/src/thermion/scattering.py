"""Scattering states, the generalized Fourier transform and its spectral identities.

Two routes to phi(k, x):

* a Nystrom discretisation of the modified Lippmann-Schwinger equation
  phi~ = |V|^{1/2} e_k + L_kappa phi~ on a SupportGrid, followed by the
  recovery sum for phi (the 3-D route);
* the partial-wave engine of ``radial`` (the radial route), used wherever
  high momenta or many evaluations are needed.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .potential import Potential, discrete_spectrum, BoundState
from .quadrature import SupportGrid, SphericalGrid, KGrid, SphereRule, gauss_panels
from .radial import RadialSolver, legendre_table

FOURPI = 4.0 * np.pi
NORM3 = (2.0 * np.pi) ** -1.5


class SingularSystem(RuntimeError):
    pass


class DomainTruncationWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# Nystrom route
# --------------------------------------------------------------------------

def _v_factors(pot: Potential, grid: SupportGrid):
    v = pot.at_points(grid.nodes)
    sabs = np.sqrt(np.abs(v))
    return v, sabs, -sabs  # V, |V|^{1/2}, V^{1/2} = |V|^{1/2} sgn V


def newton_self_term(grid: SupportGrid) -> np.ndarray:
    """Singularity-subtraction diagonal for the 1/|x-y| part of the kernel.

    int_B dy/|x_i - y| = 2 pi (R^2 - |x_i|^2 / 3) exactly, minus the off-diagonal
    row sum of the rule; the smooth remainder (e^{i kappa r} - 1)/r is treated
    by its value i kappa at r = 0.
    """
    x = grid.nodes
    exact = 2.0 * np.pi * (grid.radius**2 - np.sum(x**2, axis=1) / 3.0)
    ones = np.ones(len(x))
    rows = kernels.helmholtz_matrix(x, ones, grid.weights, 0.0, 0, np.zeros(len(x))).real.sum(axis=1)
    return exact - rows


def rollnik_operator(pot: Potential, kappa: float, grid: SupportGrid,
                     self_term: str = "subtract") -> np.ndarray:
    """Matrix of L_kappa acting on node values of phi~.

    Off-diagonal entries are -(1/4pi)|V_i|^{1/2} e^{i kappa r_ij}/r_ij V_j^{1/2} w_j.
    ``self_term`` picks the diagonal: "ball" integrates the kernel over a ball
    of the node's volume, "subtract" uses singularity subtraction.
    """
    v, sabs, vhalf = _v_factors(pot, grid)
    left = -sabs / FOURPI
    right = vhalf * grid.weights
    if self_term == "ball":
        cell = grid.self_cell(kappa)
    elif self_term == "subtract":
        cell = newton_self_term(grid) + 1j * kappa * grid.weights
    else:
        raise ValueError(f"unknown self_term {self_term!r}")
    diag = left * vhalf * cell
    return kernels.helmholtz_matrix(grid.nodes, left, right, float(kappa), 0, diag)


def symmetric_form(L: np.ndarray, grid: SupportGrid) -> np.ndarray:
    """W^{1/2} L W^{-1/2}: the operator in the weighted L^2 inner product."""
    s = np.sqrt(grid.weights)
    return s[:, None] * L / s[None, :]


def sigma_min(L: np.ndarray, grid: SupportGrid, iterations: int = 60) -> float:
    """Smallest singular value of Id - L in the weighted inner product.

    Dense SVD for small systems, inverse power iteration on A^H A otherwise.
    """
    A = np.eye(len(L)) - symmetric_form(L, grid)
    if len(A) <= 1000:
        return float(np.linalg.svd(A, compute_uv=False)[-1])
    from scipy.linalg import lu_factor, lu_solve
    lu = lu_factor(A)
    x = np.random.default_rng(0).standard_normal(len(A)) + 0j
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iterations):
        y = lu_solve(lu, lu_solve(lu, x, trans=2))
        new = np.linalg.norm(y)
        x = y / new
        if abs(new - lam) <= 1e-10 * new:
            break
        lam = new
    return float(1.0 / np.sqrt(new))


def operator_norm(L: np.ndarray, grid: SupportGrid) -> float:
    return float(np.linalg.norm(symmetric_form(L, grid), 2))


def weighted_norm(values, grid: SupportGrid) -> float:
    return float(np.sqrt(np.sum(grid.weights * np.abs(values) ** 2)))


@dataclass(frozen=True)
class ScatteringState:
    k: np.ndarray
    phi_tilde: np.ndarray
    grid: SupportGrid = field(repr=False)
    potential: Potential = field(repr=False)
    residual: float = 0.0
    sigma_min: float = 1.0

    @property
    def v_half(self) -> np.ndarray:
        return -np.sqrt(np.abs(self.potential.at_points(self.grid.nodes)))

    def to_json(self) -> str:
        return json.dumps({
            "k": [float(c) for c in self.k], "residual": self.residual, "sigma_min": self.sigma_min,
            "potential": json.loads(self.potential.to_json()),
            "grid": {"radius": self.grid.radius, "n_radial": self.grid.n_radial,
                     "sphere_degree": self.grid.sphere.degree},
        }, sort_keys=True)

    def to_csv_rows(self):
        rows = []
        for node, w, val in zip(self.grid.nodes, self.grid.weights, self.phi_tilde):
            rows.append([*node, w, val.real, val.imag])
        return ["x", "y", "z", "weight", "phi_tilde_re", "phi_tilde_im"], rows


def solve_scattering_state(pot: Potential, k, grid: SupportGrid, tol: float = 1e-10,
                           L: np.ndarray | None = None, self_term: str = "subtract") -> ScatteringState:
    k = np.asarray(k, dtype=float)
    kap = float(np.linalg.norm(k))
    if L is None:
        L = rollnik_operator(pot, kap, grid, self_term)
    _, sabs, _ = _v_factors(pot, grid)
    rhs = sabs * np.exp(1j * grid.nodes @ k)
    if pot.is_zero:
        return ScatteringState(k, np.zeros(grid.size, complex), grid, pot, 0.0, 1.0)
    A = np.eye(grid.size) - L
    smin = sigma_min(L, grid)
    if smin < 1e-12:
        raise SingularSystem(f"Id - L is numerically singular (sigma_min = {smin:.3e})")
    sol = np.linalg.solve(A, rhs)
    res = weighted_norm(A @ sol - rhs, grid) / max(weighted_norm(rhs, grid), 1e-300)
    if res > tol:
        sol = sol + np.linalg.solve(A, rhs - A @ sol)
        res = weighted_norm(A @ sol - rhs, grid) / max(weighted_norm(rhs, grid), 1e-300)
    return ScatteringState(k, sol, grid, pot, float(res), smin)


def recover_phi(state: ScatteringState, points) -> np.ndarray:
    """phi(k, x) = e^{ikx} - (1/4pi) sum_j w_j e^{i|k||x-y_j|}/|x-y_j| V^{1/2}(y_j) phi~(y_j)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    k = state.k
    plane = np.exp(1j * pts @ k)
    if state.potential.is_zero:
        return plane
    g = state.grid
    coeff = g.weights * state.v_half * state.phi_tilde
    kap = float(np.linalg.norm(k))
    out = plane - kernels.helmholtz_apply(pts, g.nodes, coeff, kap, 0) / FOURPI
    # points sitting on a node pick up that node's self-cell integral
    dist, idx = cKDTree(g.nodes).query(pts)
    hit = dist == 0.0
    if hit.any():
        j = idx[hit]
        cell = (newton_self_term(g) + 1j * kap * g.weights)[j]
        out[hit] -= state.v_half[j] * state.phi_tilde[j] * cell / FOURPI
    return out


# --------------------------------------------------------------------------
# Partial-wave route
# --------------------------------------------------------------------------

class Engine:
    """Partial-wave scattering data for one radial potential."""

    def __init__(self, pot: Potential, steps: int = 2000, ell_max_bound: int = 2,
                 bound_states: list[BoundState] | None = None):
        self.potential = pot
        self.R = pot.support_radius
        self.solver = RadialSolver(pot, self.R, steps=steps)
        if bound_states is None:
            bound_states = discrete_spectrum(pot, ell_max=ell_max_bound)
        self.bound_states = bound_states

    def radial_table(self, ell: int, k, r) -> np.ndarray:
        if self.potential.is_zero:
            from scipy.special import spherical_jn
            k = np.atleast_1d(np.asarray(k, float))
            return spherical_jn(ell, k[:, None] * np.asarray(r, float)[None, :]).astype(complex)
        return self.solver.radial_function(ell, k, r)

    def radial_tables(self, ell_max: int, k, r):
        """Iterator over R_l(k, r) for l = 0..ell_max (shared Bessel tables)."""
        if self.potential.is_zero:
            from .radial import spherical_jn_table
            k = np.atleast_1d(np.asarray(k, float))
            return iter(spherical_jn_table(ell_max, k[:, None] * np.asarray(r, float)[None, :]).astype(complex))
        return self.solver.radial_functions(ell_max, k, r)

    def phi(self, k, points, ell_max: int | None = None) -> np.ndarray:
        """phi(k, x) at 3-D points by the partial-wave series."""
        k = np.asarray(k, dtype=float)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        kap = float(np.linalg.norm(k))
        r = np.linalg.norm(pts, axis=1)
        if ell_max is None:
            ell_max = int(kap * max(r.max(), self.R) + 25)
        rr = np.where(r > 0, r, 1e-300)
        cosg = np.where(r > 0, pts @ k / (rr * kap), 1.0)
        P = legendre_table(ell_max, cosg)
        out = np.zeros(len(pts), dtype=complex)
        for ell in range(ell_max + 1):
            Rl = self.radial_table(ell, np.array([kap]), np.where(r > 0, r, 1e-12))[0]
            out += (2 * ell + 1) * (1j**ell) * Rl * P[ell]
        return out


@dataclass
class TransformPlan:
    """Cached radial tables for the transform between a SphericalGrid and a KGrid."""

    engine: Engine
    grid: SphericalGrid
    kgrid: KGrid
    ell_max: int
    tables: list = field(default_factory=list, repr=False)  # conj R_l(k_a, r_c)
    p_x_k: np.ndarray = field(default=None, repr=False)  # P_l(x_hat . k_hat)

    @classmethod
    def build(cls, engine: Engine, grid: SphericalGrid, kgrid: KGrid, ell_max: int | None = None):
        if ell_max is None:
            ell_max = min(grid.sphere.degree, kgrid.sphere.degree) // 2
        tables = [engine.radial_table(l, kgrid.radial, grid.r) for l in range(ell_max + 1)]
        cosg = grid.sphere.points @ kgrid.sphere.points.T
        P = legendre_table(ell_max, np.clip(cosg, -1, 1))
        return cls(engine, grid, kgrid, ell_max, tables, P)

    def forward(self, f) -> np.ndarray:
        """f^# on the KGrid nodes, shape (n_k_radial, n_k_angular)."""
        f = np.asarray(f)
        g = self.grid
        wr = g.r_weights * g.r**2
        fw = f * g.sphere.weights[None, :]
        out = np.zeros(self.kgrid.shape, dtype=complex)
        for l in range(self.ell_max + 1):
            A = fw @ self.p_x_k[l]  # (nr, nkb)
            out += (2 * l + 1) * (-1j) ** l * (np.conj(self.tables[l]) * wr[None, :]) @ A
        return NORM3 * out

    def inverse(self, fs) -> np.ndarray:
        """(2 pi)^{-3/2} int phi(k, x) f#(k) dk on the SphericalGrid nodes."""
        kg = self.kgrid
        fw = np.asarray(fs) * kg.measure
        out = np.zeros(self.grid.shape, dtype=complex)
        for l in range(self.ell_max + 1):
            B = self.tables[l].T @ fw  # (nr, nkb)
            out += (2 * l + 1) * (1j) ** l * B @ self.p_x_k[l].T
        return NORM3 * out


def generalized_fourier(f, grid: SphericalGrid, engine: Engine, kgrid: KGrid,
                        ell_max: int | None = None, plan: TransformPlan | None = None) -> np.ndarray:
    """f^#(k) = (2pi)^{-3/2} int conj(phi(k,x)) f(x) dx by quadrature on ``grid``.

    ``f`` is either samples on the grid or a callable of (n, 3) points; for a
    callable the mass outside the grid's ball is estimated and a warning is
    issued above 1%.
    """
    if callable(f):
        frac = truncation_fraction(f, grid)
        if frac > 0.01:
            warnings.warn(f"{100 * frac:.1f}% of |f|^2 lies outside the evaluation ball",
                          DomainTruncationWarning)
        f = grid.sample(f)
    if plan is None:
        plan = TransformPlan.build(engine, grid, kgrid, ell_max)
    return plan.forward(f)


def truncation_fraction(f, grid: SphericalGrid) -> float:
    rmax = grid.r[-1] + 0.5 * (grid.r[-1] - grid.r[-2])
    ro, wo = gauss_panels(np.linspace(rmax, 4 * rmax, 25), 6)
    outer = SphericalGrid(ro, wo, grid.sphere)
    inner = grid.norm(grid.sample(f)) ** 2
    out = outer.norm(outer.sample(f)) ** 2
    return float(out / max(inner + out, 1e-300))


def bound_projections(engine: Engine, grid: SphericalGrid, f) -> list[tuple[BoundState, np.ndarray]]:
    """Overlaps <phi_{n l m}, f> for every bound state (m over its multiplet)."""
    from scipy.special import sph_harm_y
    out = []
    pts = grid.sphere.points
    theta = np.arccos(np.clip(pts[:, 2], -1, 1))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    for st in engine.bound_states:
        rad = st.radial(grid.r) * grid.r_weights * grid.r**2
        ov = []
        for m in range(-st.ell, st.ell + 1):
            Y = sph_harm_y(st.ell, m, theta, phi)
            ov.append(rad @ (np.asarray(f) @ (np.conj(Y) * grid.sphere.weights)))
        out.append((st, np.array(ov)))
    return out


def bound_component(engine: Engine, grid: SphericalGrid, f) -> np.ndarray:
    """sum_n <phi_n, f> phi_n on the grid."""
    from scipy.special import sph_harm_y
    pts = grid.sphere.points
    theta = np.arccos(np.clip(pts[:, 2], -1, 1))
    phi = np.arctan2(pts[:, 1], pts[:, 0])
    out = np.zeros(grid.shape, dtype=complex)
    for st, ov in bound_projections(engine, grid, f):
        rad = st.radial(grid.r)
        for c, m in zip(ov, range(-st.ell, st.ell + 1)):
            out += c * rad[:, None] * sph_harm_y(st.ell, m, theta, phi)[None, :]
    return out


def laplacian_fd(f, points, h: float = 1e-2) -> np.ndarray:
    """Fourth-order central-difference Laplacian of a callable at points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    out = np.zeros(len(pts), dtype=complex)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        for s, cs in zip(range(-2, 3), c):
            out += cs * f(pts + s * e)
    return out


def hamiltonian_fd(f, pot: Potential, h: float = 1e-2):
    """Callable x -> (-Delta + V) f(x) with fourth-order differences."""
    return lambda pts: -laplacian_fd(f, pts, h) + pot.at_points(pts) * f(pts)


def gaussian(center, width: float = 0.7, amplitude: float = 1.0):
    c = np.asarray(center, dtype=float)
    return lambda x: amplitude * np.exp(-np.sum((np.asarray(x) - c) ** 2, axis=-1) / (2 * width**2))


def gaussian_ft(center, width: float = 0.7, amplitude: float = 1.0):
    """Closed-form (2pi)^{-3/2} int e^{-ikx} g(x) dx of ``gaussian``."""
    c = np.asarray(center, dtype=float)
    return lambda k: amplitude * width**3 * np.exp(-0.5 * width**2 * np.sum(np.asarray(k) ** 2, -1)
                                                   - 1j * np.asarray(k) @ c)


def default_battery():
    return [gaussian([0.0, 0.0, 0.0], 0.7), gaussian([0.3, -0.2, 0.4], 0.6),
            gaussian([0.0, 0.5, 0.0], 0.8)]


def spectral_identities_check(engine: Engine, grid: SphericalGrid, kgrid: KGrid,
                              battery=None, fd_step: float = 1e-2) -> dict:
    """Parseval, intertwining and reconstruction defects over a battery of test functions."""
    battery = battery if battery is not None else default_battery()
    plan = TransformPlan.build(engine, grid, kgrid)
    k2 = kgrid.radial[:, None] ** 2
    pars, inter, recon = [], [], []
    for f in battery:
        fs = grid.sample(f)
        fsh = plan.forward(fs)
        nf2 = grid.norm(fs) ** 2
        bsum = sum(float(np.sum(np.abs(ov) ** 2)) for _, ov in bound_projections(engine, grid, fs))
        nk2 = float(np.sum(kgrid.measure * np.abs(fsh) ** 2))
        pars.append(abs(nk2 + bsum - nf2) / nf2)
        Hf = grid.sample(hamiltonian_fd(f, engine.potential, fd_step))
        hsh = plan.forward(Hf)
        num = np.sqrt(np.sum(kgrid.measure * np.abs(hsh - k2 * fsh) ** 2))
        den = np.sqrt(np.sum(kgrid.measure * np.abs(k2 * fsh) ** 2))
        inter.append(float(num / den))
        pess = fs - bound_component(engine, grid, fs)
        rec = plan.inverse(fsh)
        recon.append(grid.norm(rec - pess) / grid.norm(fs))
    orth = [0.0]
    for st in engine.bound_states:
        if st.ell <= plan.ell_max:
            ps = grid.sample(st.psi)
            orth.append(float(np.sqrt(np.sum(kgrid.measure * np.abs(plan.forward(ps)) ** 2)) / grid.norm(ps)))
    return {"parseval_defect": float(max(pars)), "intertwining_defect": float(max(inter)),
            "reconstruction_defect": float(max(recon)), "bound_orthogonality": float(max(orth)),
            "per_function": {"parseval": pars, "intertwining": inter, "reconstruction": recon}}


# --------------------------------------------------------------------------
# Dilations in k-space
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UniformRadialGrid:
    """Uniform radial k-nodes (for finite differences) times a sphere rule."""

    radial: np.ndarray
    step: float
    sphere: SphereRule

    @property
    def measure(self):
        return (self.step * self.radial**2)[:, None] * self.sphere.weights[None, :]

    def sample(self, g):
        pts = self.radial[:, None, None] * self.sphere.points[None, :, :]
        return np.asarray(g(pts.reshape(-1, 3))).reshape(len(self.radial), self.sphere.size)

    def refined(self):
        h = self.step / 2
        r = np.arange(1, 2 * len(self.radial) + 1) * h
        return UniformRadialGrid(r, h, self.sphere)


def uniform_radial_grid(k_max: float = 3.0, n: int = 120, sphere: SphereRule | None = None):
    from .quadrature import sphere_rule
    h = k_max / n
    return UniformRadialGrid(np.arange(1, n + 1) * h, h, sphere if sphere is not None else sphere_rule(7))


def _radial_derivative(values, h):
    """Fourth-order central difference along axis 0 (zero padding outside)."""
    v = np.pad(values, ((2, 2), (0, 0)))
    return (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)


def dilation_apply(g, grid: UniformRadialGrid) -> np.ndarray:
    """A_D g = (i/2)(k.grad + 3/2) g, symmetrised for the k^2 dk measure."""
    k = grid.radial[:, None]
    raw = lambda v: 0.5j * (k * _radial_derivative(v, grid.step) + 1.5 * v)
    # adjoint of raw in the measure k^2 dk: (i/2)(k d/dk + 3/2 + ...) via transpose
    kk = grid.radial[:, None] ** 2

    def adj(v):
        # -(i/2) k^{-2} D^T (k^3 v) + conj(3i/4) v, with D^T = -D for the central stencil
        return -0.5j * (-(_radial_derivative(grid.radial[:, None] ** 3 * v, grid.step)) / kk) - 0.75j * v
    return 0.5 * (raw(g) + adj(g))


def dilation_commutator_check(g, grid: UniformRadialGrid) -> dict:
    """Defect of i[q^2, A_D] = q^2 for k-space samples g (supported away from k=0)."""
    q2 = grid.radial[:, None] ** 2
    comm = 1j * (q2 * dilation_apply(g, grid) - dilation_apply(q2 * g, grid))
    target = q2 * g
    m = grid.measure
    defect = np.sqrt(np.sum(m * np.abs(comm - target) ** 2)) / np.sqrt(np.sum(m * np.abs(target) ** 2))
    form = np.sum(m * np.conj(g) * comm)
    return {"defect": float(defect), "form_real": float(form.real), "form_imag": float(form.imag),
            "form_target": float(np.sum(m * q2 * np.abs(g) ** 2))}


def shell_bump(k_lo: float = 1.0, k_hi: float = 2.0, amplitude: float = 1.0):
    """Smooth function of k supported in k_lo < |k| < k_hi with a mild angular factor."""
    from .potential import _rise

    def g(k):
        k = np.asarray(k, dtype=float)
        r = np.linalg.norm(k, axis=-1)
        t = (r - k_lo) / (k_hi - k_lo)
        b = _rise(t) * _rise(1 - t)
        rr = np.where(r > 0, r, 1.0)
        return amplitude * b * (1.0 + 0.3 * k[..., 2] / rr)
    return g
