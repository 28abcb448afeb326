"""thermion command line: configuration, module checks and result files.

Every command writes ``<out>/<command>.json`` (resolved config, versions,
results, checks, failures) and one CSV per table at full round-trip
precision.  Exit status is 0 when every check passes, 2 when a check fails
and 1 for configuration or I/O errors.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

COMMANDS = ("scatter", "spectral-check", "born-decay", "klein-zemach", "thermal-check", "fgr", "oracle")


class ConfigError(ValueError):
    pass


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _ints(text) -> tuple:
    return tuple(int(round(v)) for v in _floats(text))


@dataclass
class RunConfig:
    # potential
    well_depth: float = 10.0
    well_radius: float = 1.0
    smoothness: float = 0.5
    radial_steps: int = 2000
    # scattering / transform grids
    k: tuple = (0.3, 0.5, 1.2)
    support_nodes: int = 24
    support_sphere: int = 11
    grid_radius: float = 7.0
    grid_panels: int = 16
    grid_order: int = 8
    grid_sphere: int = 17
    kgrid_max: float = 16.0
    kgrid_panel: float = 0.25
    kgrid_order: int = 6
    kgrid_sphere: int = 17
    dilation_kmax: float = 4.0
    dilation_nodes: int = 120
    # Born decay and stationary phase
    p: tuple = (3, 5)
    kmin: float = 5.0
    kmax: float = 40.0
    samples: int = 6
    phase_orders: tuple = (1, 2, 3)
    # Klein-Zemach
    kappa_sweep: str = "1:100:log"
    kappa_count: int = 15
    pairs: int = 20
    agreement_pairs: int = 3
    agreement_kappas: tuple = (1.0, 5.0)
    # thermal and coupling
    beta: tuple = (1.0,)
    uniformity_betas: tuple = (0.25, 1.0, 4.0)
    kappa: str = "sqrt_gaussian"
    coupling_c: float = 1.0
    coupling_amplitude: float = 1.0
    u_per_decade: int = 4
    u_order: int = 12
    # level shift
    epsilon: float = 0.1
    alpha: float = 0.05
    f2_betas: tuple = (1.0, 2.0, 4.0, 7.0, 10.0)
    witness_omegas: tuple = (0.5, 1.0, 2.0)
    dipole_alphas: tuple = (0.01, 0.2)
    dipole_samples: int = 6
    oracle_nu: int = 100
    # plumbing
    seed: int = 7
    out: str = "thermion-out"
    workers: int = 0

    _LISTS = {"k": _floats, "p": _ints, "phase_orders": _ints, "agreement_kappas": _floats,
              "beta": _floats, "uniformity_betas": _floats, "f2_betas": _floats,
              "witness_omegas": _floats, "dipole_alphas": _floats}
    _NONNEG = {"well_depth", "workers"}
    _FREE = {"k", "kappa_sweep", "kappa", "out", "seed"}

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        unknown = sorted(set(values) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        kw = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in values.items():
            try:
                if key in cls._LISTS:
                    kw[key] = cls._LISTS[key](raw)
                elif types[key] == "int":
                    kw[key] = int(raw)
                elif types[key] == "float":
                    kw[key] = float(raw)
                else:
                    kw[key] = str(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw!r}") from exc
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in self._FREE:
                continue
            vals = v if isinstance(v, tuple) else (v,)
            if not vals:
                raise ConfigError(f"{f.name} is empty")
            lo_ok = (lambda x: x >= 0) if f.name in self._NONNEG else (lambda x: x > 0)
            if not all(lo_ok(x) for x in vals):
                raise ConfigError(f"{f.name} must be positive (got {v})")
        if len(self.k) != 3:
            raise ConfigError("k needs three components")
        if not self.smoothness < self.well_radius:
            raise ConfigError("smoothness must be below the well radius")
        if self.kappa not in KAPPA_PRESETS:
            raise ConfigError(f"unknown kappa preset {self.kappa!r}; choose from {sorted(KAPPA_PRESETS)}")
        parse_sweep(self.kappa_sweep, self.kappa_count)

    def to_dict(self) -> dict:
        return {f.name: list(v) if isinstance(v := getattr(self, f.name), tuple) else v for f in fields(self)}


def read_config_file(path: str) -> dict:
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def parse_sweep(text: str, count: int) -> np.ndarray:
    """'a:b:log' or 'a:b:lin' into ``count`` points."""
    try:
        a, b, kind = text.split(":")
        a, b = float(a), float(b)
    except ValueError as exc:
        raise ConfigError(f"bad sweep {text!r}; expected lo:hi:log or lo:hi:lin") from exc
    if not 0 < a < b or kind not in ("log", "lin"):
        raise ConfigError(f"bad sweep {text!r}")
    return np.geomspace(a, b, count) if kind == "log" else np.linspace(a, b, count)


# --------------------------------------------------------------------------
# shared setup
# --------------------------------------------------------------------------

def _example(cfg):
    from .thermal import example_coupling
    return example_coupling(cfg.coupling_c, cfg.coupling_amplitude)


def _monomial(cfg):
    from .thermal import monomial_coupling
    return monomial_coupling(3)


KAPPA_PRESETS = {"sqrt_gaussian": _example, "monomial3": _monomial}


def build_potential(cfg):
    from .potential import make_bump_well
    return make_bump_well(cfg.well_depth, cfg.well_radius, cfg.smoothness)


def build_engine(cfg):
    from .scattering import Engine
    return Engine(build_potential(cfg), steps=cfg.radial_steps)


def build_coupling(cfg):
    return KAPPA_PRESETS[cfg.kappa](cfg)


@dataclass
class Check:
    name: str
    value: float
    limit: float
    relation: str  # "<=", ">=", "<", ">"
    passed: bool = field(init=False)

    def __post_init__(self):
        v, l = float(self.value), float(self.limit)
        ok = {"<=": v <= l, ">=": v >= l, "<": v < l, ">": v > l}[self.relation]
        self.passed = bool(ok and np.isfinite(v))

    def to_dict(self):
        return {"name": self.name, "value": float(self.value), "limit": float(self.limit),
                "relation": self.relation, "passed": self.passed}


@dataclass
class Report:
    command: str
    results: dict
    checks: list
    tables: dict = field(default_factory=dict)  # name -> (header, rows)

    @property
    def failures(self):
        return [c.to_dict() for c in self.checks if not c.passed]


def _clean(obj):
    """Plain JSON types (numpy scalars and arrays unwrapped, complex split)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def versions() -> dict:
    import scipy
    from . import __version__, kernels
    return {"thermion": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "kernel_backend": kernels.BACKEND}


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_scatter(cfg: RunConfig) -> Report:
    from .born import born_term, probe_points
    from .potential import make_bump_well
    from .quadrature import support_grid
    from .scattering import recover_phi, solve_scattering_state
    from .spheroidal import klein_zemach_sweep
    pot = build_potential(cfg)
    eng = build_engine(cfg)
    k = np.asarray(cfg.k, float)
    pts = probe_points(cfg.well_radius, 20, cfg.seed)
    st = solve_scattering_state(pot, k, support_grid(cfg.well_radius, cfg.support_nodes, cfg.support_sphere))
    nys = recover_phi(st, pts)
    pw = eng.phi(k, pts)
    agree = float(np.max(np.abs(nys - pw)) / np.max(np.abs(pw)))
    # the same routes with V = 0
    free = make_bump_well(0.0, cfg.well_radius, cfg.smoothness)
    fst = solve_scattering_state(free, k, support_grid(cfg.well_radius, cfg.support_nodes, cfg.support_sphere))
    plane = np.exp(1j * pts @ k)
    free_phi = float(np.max(np.abs(recover_phi(fst, pts) - plane)))
    free_born = max(float(np.max(np.abs(born_term(free, k, n, pts)))) for n in (1, 2, 3))
    free_kz = float(np.max(np.abs(klein_zemach_sweep(free, pts[0], pts[1], [1.0, 5.0, 20.0]))))
    header, rows = st.to_csv_rows()
    phi_rows = [[*x, a.real, a.imag, b.real, b.imag] for x, a, b in zip(pts, nys, pw)]
    checks = [Check("free_recover_phi", free_phi, 1e-12, "<="),
              Check("free_born_terms", free_born, 0.0, "<="),
              Check("free_klein_zemach", free_kz, 0.0, "<="),
              Check("solve_residual", st.residual, 1e-10, "<="),
              Check("nystrom_vs_partial_wave", agree, 2e-2, "<=")]
    return Report("scatter", {"state": json.loads(st.to_json()), "route_agreement": agree,
                              "free_case": {"recover_phi": free_phi, "born": free_born, "klein_zemach": free_kz}},
                  checks, {"scatter_state": (header, rows),
                           "scatter_phi": (["x", "y", "z", "nystrom_re", "nystrom_im",
                                            "partial_wave_re", "partial_wave_im"], phi_rows)})


def _spectral_grids(cfg, refine: int):
    from .quadrature import k_grid, spherical_grid
    panels = cfg.grid_panels * (3 ** refine) // (2 ** refine)
    kmax = cfg.kgrid_max * 1.25**refine
    return (spherical_grid(cfg.grid_radius, panels, cfg.grid_order, cfg.grid_sphere, r_split=cfg.well_radius),
            k_grid(kmax, cfg.kgrid_panel, cfg.kgrid_order, cfg.kgrid_sphere))


def cmd_spectral_check(cfg: RunConfig) -> Report:
    from .scattering import dilation_commutator_check, shell_bump, spectral_identities_check, uniform_radial_grid
    eng = build_engine(cfg)
    reps = [spectral_identities_check(eng, *_spectral_grids(cfg, r)) for r in (0, 1)]
    keys = ("parseval_defect", "intertwining_defect", "reconstruction_defect")
    checks = []
    for key in keys:
        checks.append(Check(key, reps[0][key], 1e-3, "<="))
        checks.append(Check(key + "_refined_drop", reps[1][key] - reps[0][key], 0.0, "<"))
    checks.append(Check("bound_orthogonality", reps[0]["bound_orthogonality"], 1e-3, "<="))
    ug = uniform_radial_grid(cfg.dilation_kmax, cfg.dilation_nodes)
    bump = shell_bump(1.0, 2.0)
    dil = [dilation_commutator_check(ug.sample(bump), ug)]
    ug2 = ug.refined()
    dil.append(dilation_commutator_check(ug2.sample(bump), ug2))
    checks += [Check("dilation_defect", dil[0]["defect"], 1e-2, "<="),
               Check("dilation_refined_ratio", dil[1]["defect"] / dil[0]["defect"], 0.5, "<="),
               Check("dilation_form_imag", abs(dil[0]["form_imag"]), 1e-10, "<=")]
    rows = [[lvl] + [reps[lvl][k] for k in keys] + [reps[lvl]["bound_orthogonality"]] for lvl in (0, 1)]
    return Report("spectral-check", {"default": reps[0], "refined": reps[1], "dilation": dil}, checks,
                  {"spectral": (["refinement", *keys, "bound_orthogonality"], rows)})


def cmd_born_decay(cfg: RunConfig) -> Report:
    from .born import bump3, remainder_decay_fit, stationary_phase_probe
    pot = build_potential(cfg)
    ks = np.geomspace(cfg.kmin, cfg.kmax, cfg.samples)
    need = {3: 0.7, 5: 1.7}
    fits, checks, rows = [], [], []
    for p in cfg.p:
        r = remainder_decay_fit(pot, p, ks)
        fits.append(r)
        checks.append(Check(f"remainder_exponent_p{p}", r["exponent"], need.get(p, (p - 1) // 2 - 0.3), ">="))
        rows += [[p, kk, s, r["slope"]] for kk, s in zip(r["k"], r["sup"])]
    g = bump3((0.1, -0.2, 0.3), 1.0)
    phase, prow = [], []
    for n in cfg.phase_orders:
        r = stationary_phase_probe(g, n, np.geomspace(4.0, 40.0, 12))
        phase.append(r)
        checks.append(Check(f"stationary_phase_slope_n{n}", r["slope"], -n + 0.3, "<="))
        # |g^(k)| <k>^n against sup_|a|<=n ||D^a g||_1, the n-dependent half of the bound
        checks.append(Check(f"stationary_phase_bound_n{n}", r["max_ratio_to_bound"], 1.0, "<="))
        prow += [[n, kk, v, r["slope"]] for kk, v in zip(r["k"], r["values"])]
    return Report("born-decay", {"remainder": fits, "stationary_phase": phase}, checks,
                  {"born_decay": (["p", "k", "sup", "slope"], rows),
                   "stationary_phase": (["n", "k", "abs_value", "slope"], prow)})


def cmd_klein_zemach(cfg: RunConfig) -> Report:
    from .born import probe_points
    from .spheroidal import decay_sweep, klein_zemach_direct, klein_zemach_sweep
    pot = build_potential(cfg)
    P = probe_points(cfg.well_radius, 2 * max(cfg.pairs, cfg.agreement_pairs), cfg.seed + 4)
    pairs = [(P[2 * i], P[2 * i + 1]) for i in range(cfg.pairs)]
    agree = []
    for x, xp in pairs[: cfg.agreement_pairs]:
        for n1, n2 in ((0, 0), (1, 2)):
            s = klein_zemach_sweep(pot, x, xp, cfg.agreement_kappas, n1, n2)
            for kap, sv in zip(cfg.agreement_kappas, s):
                d = klein_zemach_direct(pot, x, xp, kap, n1, n2)
                agree.append([n1, n2, kap, abs(sv - d) / abs(d)])
    kappas = parse_sweep(cfg.kappa_sweep, cfg.kappa_count)
    sweeps = [decay_sweep(pot, pairs, kappas, n1, n2) for n1, n2 in ((0, 0), (3, 3))]
    worst = max(a[3] for a in agree)
    checks = [Check("spheroidal_vs_direct", worst, 1e-6, "<=")]
    rows = []
    for (n1, n2), sw in zip(((0, 0), (3, 3)), sweeps):
        checks.append(Check(f"decay_slope_n{n1}{n2}", sw["slope"], -0.7, "<="))
        rows += [[n1, n2, kk, s, ks, sw["slope"]] for kk, s, ks in zip(sw["kappa"], sw["sup"], sw["kappa_sup"])]
    return Report("klein-zemach", {"agreement": agree, "sweeps": sweeps}, checks,
                  {"klein_zemach": (["n1", "n2", "kappa", "sup_abs_I", "kappa_sup", "slope"], rows),
                   "klein_zemach_agreement": (["n1", "n2", "kappa", "rel_diff"], agree)})


def cmd_thermal_check(cfg: RunConfig) -> Report:
    from .thermal import (beta_uniformity, detailed_balance_defect, geometric_u_grid,
                          glued_norm_identity, rho_bounds_check, uv_cutoff)
    bounds = rho_bounds_check(sorted(set(cfg.beta + cfg.uniformity_betas)))
    u = np.geomspace(1e-6, 50.0, 500)
    db = max(detailed_balance_defect(b, u / b) for b in cfg.beta)
    c = build_coupling(cfg)
    ir = c.ir
    uni = beta_uniformity(c, cfg.uniformity_betas)
    norms = []
    for b in cfg.uniformity_betas:
        grid = geometric_u_grid(uv_cutoff(c, b), per_decade=cfg.u_per_decade, order=cfg.u_order)
        norms.append(glued_norm_identity(c, b, grid))
    checks = [Check("rho_bound_violations", len(bounds["violations"]), 0, "<="),
              Check("detailed_balance", db, 1e-12, "<="),
              Check("rho_derivative_constant_spread", max(bounds["spread"].values()), 0.05, "<="),
              Check("infrared_class_accepted", float(ir.accepted), 1.0, ">="),
              Check("glued_norm_identity", max(n["rel_diff"] for n in norms), 1e-10, "<=")]
    for j, s in enumerate(uni["spread"]):
        checks.append(Check(f"glued_norm_spread_j{j}", s, 0.25, "<="))
    rows = [[b, j, row["ratios"][j]] for b, row in zip(uni["betas"], uni["rows"]) for j in range(len(uni["spread"]))]
    return Report("thermal-check", {"rho_bounds": bounds, "detailed_balance": db,
                                    "uniformity": uni, "infrared": dataclasses.asdict(ir),
                                    "norm_identity": norms}, checks,
                  {"glued_norms": (["beta", "j", "norm_over_1_plus_inv_beta"], rows)})


def _fgr_setup(cfg):
    from .fgr import InteractionG, fgr_k_grid
    from .thermal import uv_cutoff
    eng = build_engine(cfg)
    st = eng.bound_states[0]
    c = build_coupling(cfg)
    g = InteractionG(c, cfg.alpha)
    om = max(uv_cutoff(c, b, rel=1e-10) for b in sorted(set(cfg.beta + cfg.f2_betas)))
    kg = fgr_k_grid(st.energy, cfg.epsilon, om)
    return eng, st, c, g, om, kg


def cmd_fgr(cfg: RunConfig) -> Report:
    from .fgr import (InteractionG, dipole_completeness, dipole_error_slope, dipole_leading_term,
                      fgr_tables, level_shift_from_tables, omega_rule, check_resolution, positivity_witness)
    eng, st, c, g, om, kg = _fgr_setup(cfg)
    check_resolution(kg, st.energy, omega_rule(om)[0], cfg.epsilon)
    T = fgr_tables(eng, st, g, kg, om)
    records = [level_shift_from_tables(T, cfg.epsilon, b).to_dict() for b in cfg.beta]
    F2 = [level_shift_from_tables(T, cfg.epsilon, b).F2 for b in cfg.f2_betas]
    f2_var = float((max(F2) - min(F2)) / max(F2))
    wit = [positivity_witness(eng, st, g, w) for w in cfg.witness_omegas]
    gd = InteractionG(c, cfg.alpha, phase="alpha")
    lead = [dipole_leading_term(eng, st, gd.with_alpha(a), 1.0) for a in (0.1, 0.05)]
    alphas = np.geomspace(cfg.dipole_alphas[0], cfg.dipole_alphas[-1], cfg.dipole_samples)
    slope = dipole_error_slope(eng, st, gd, 1.0, alphas)
    comp = dipole_completeness(eng, st)
    checks = [Check(f"gamma_positive_beta{b:g}", r["gamma"], 0.0, ">") for b, r in zip(cfg.beta, records)]
    checks += [Check("witness_positive_min", min(wit), 0.0, ">"),
               Check("f2_beta_variation", f2_var, 0.10, "<"),
               Check("dipole_alpha2_scaling", abs(lead[0] / lead[1] / 4.0 - 1.0), 0.05, "<="),
               Check("dipole_error_exponent", slope["exponent"], 2.7, ">="),
               Check("dipole_completeness", comp["rel_diff"], 1e-3, "<=")]
    rows = [[r["beta"], r["F1"], r["F2"], r["F2_swapped"], r["gamma"]] for r in records]
    f2rows = [[b, f] for b, f in zip(cfg.f2_betas, F2)]
    drows = [[a, f, l, e] for a, f, l, e in zip(slope["alpha"], slope["full"], slope["leading"], slope["error"])]
    return Report("fgr", {"level_shift": records, "f2_sweep": {"beta": list(cfg.f2_betas), "F2": F2,
                                                                "variation": f2_var},
                          "witnesses": {"omega": list(cfg.witness_omegas), "value": wit},
                          "dipole": {"leading_alpha_0.1_0.05": lead, "slope": slope, "completeness": comp},
                          "omega_max": om},
                  checks, {"fgr": (["beta", "F1", "F2", "F2_swapped", "gamma"], rows),
                           "fgr_f2_sweep": (["beta", "F2"], f2rows),
                           "fgr_dipole": (["alpha", "F1_on_shell", "leading", "error"], drows)})


def cmd_oracle(cfg: RunConfig) -> Report:
    from .fgr import fgr_tables, level_shift_from_tables
    from .oracle import oracle_comparison
    eng, st, c, g, om, kg = _fgr_setup(cfg)
    T = fgr_tables(eng, st, g, kg, om)
    out, checks, rows = [], [], []
    for b in cfg.beta:
        lvl = level_shift_from_tables(T, cfg.epsilon, b)
        r = oracle_comparison(eng, g, b, cfg.epsilon, kg, om, n_u=cfg.oracle_nu, level=lvl)
        out.append(r)
        checks += [Check(f"oracle_total_beta{b:g}", r["rel_diff"], 1e-2, "<="),
                   Check(f"oracle_absorption_beta{b:g}", r["rel_diff_F1"], 2e-2, "<="),
                   Check(f"oracle_emission_beta{b:g}", r["rel_diff_F2"], 2e-2, "<=")]
        rows.append([b, r["gamma_matrix"], r["gamma_quadrature"], r["rel_diff"],
                     r["branch_split"]["absorption"], r["branch_split"]["emission"]])
    return Report("oracle", {"comparisons": out}, checks,
                  {"oracle": (["beta", "gamma_matrix", "gamma_quadrature", "rel_diff",
                               "absorption", "emission"], rows)})


RUNNERS = {"scatter": cmd_scatter, "spectral-check": cmd_spectral_check, "born-decay": cmd_born_decay,
           "klein-zemach": cmd_klein_zemach, "thermal-check": cmd_thermal_check, "fgr": cmd_fgr,
           "oracle": cmd_oracle}


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_report(rep: Report, cfg: RunConfig) -> list[str]:
    os.makedirs(cfg.out, exist_ok=True)
    meta = {"config": cfg.to_dict(), "versions": versions()}
    doc = {"command": rep.command, **meta, "passed": not rep.failures,
           "checks": [c.to_dict() for c in rep.checks], "failures": rep.failures,
           "results": _clean(rep.results)}
    paths = [os.path.join(cfg.out, rep.command + ".json")]
    with open(paths[0], "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    for name, (header, rows) in sorted(rep.tables.items()):
        path = os.path.join(cfg.out, name + ".csv")
        with open(path, "w", newline="") as fh:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        paths.append(path)
    return paths


def _run_one(args):
    name, cfg = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return RUNNERS[name](cfg)


def resolve_workers(cfg: RunConfig) -> int:
    if cfg.workers > 0:
        return cfg.workers
    env = os.environ.get("THERMION_WORKERS", "")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"THERMION_WORKERS must be an integer (got {env!r})") from exc
        if n < 1:
            raise ConfigError("THERMION_WORKERS must be positive")
        return n
    return os.cpu_count() or 1


def run(command: str, cfg: RunConfig, stream=sys.stdout) -> int:
    """Run one command (or all) and write its files; returns the exit status."""
    names = list(COMMANDS) if command == "all" else [command]
    workers = min(resolve_workers(cfg), len(names))
    jobs = [(n, cfg) for n in names]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            reports = list(pool.map(_run_one, jobs))
    else:
        reports = [_run_one(j) for j in jobs]
    failures = []
    for rep in reports:
        write_report(rep, cfg)
        for c in rep.checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {rep.command}:{c.name} "
                  f"{float(c.value):.6g} {c.relation} {float(c.limit):.6g}", file=stream)
        failures += [{"command": rep.command, **f} for f in rep.failures]
    if command == "all":
        summary = {"command": "all", "config": cfg.to_dict(), "versions": versions(),
                   "passed": not failures, "failures": failures,
                   "commands": {r.command: not r.failures for r in reports}}
        with open(os.path.join(cfg.out, "all.json"), "w") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if failures:
        print(json.dumps({"failures": failures}, sort_keys=True), file=sys.stderr)
        return 2
    return 0


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thermion", description="Scattering, thermal and level-shift checks.")
    parser.add_argument("command", choices=COMMANDS + ("all",))
    parser.add_argument("--config", help="flat key = value file")
    for key in RunConfig.keys():
        parser.add_argument("--" + key.replace("_", "-"), dest=key, default=None, metavar="V")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        values = read_config_file(args.config) if args.config else {}
        for key in RunConfig.keys():
            v = getattr(args, key)
            if v is not None:
                values[key] = v
        cfg = RunConfig.from_mapping(values)
        return run(args.command, cfg)
    except ConfigError as exc:
        print(f"thermion: config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"thermion: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
