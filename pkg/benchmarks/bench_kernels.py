"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and backend, the speedup and the
largest difference between the two outputs.
"""

import argparse
import time

import numpy as np

from thermion.kernels import backend_module


def _cases(rng):
    n = 1500
    nodes = rng.uniform(-1, 1, (n, 3))
    left = rng.standard_normal(n)
    right = rng.standard_normal(n) * 0.01
    diag = rng.standard_normal(n).astype(complex)
    targets = rng.uniform(-2, 2, (400, 3))
    coeff = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    r = np.linspace(0.0, 1.0, 4001)
    q = np.zeros_like(r)
    q[1:] = -10.0 * np.exp(-r[1:] ** 2) + 2.0 / r[1:] ** 2
    energies = np.linspace(0.1, 40.0, 64)
    return {
        "helmholtz_matrix": lambda m: m.helmholtz_matrix(nodes, left, right, 2.5, 0, diag),
        "helmholtz_apply": lambda m: m.helmholtz_apply(targets, nodes, coeff, 2.5, 0),
        "numerov_batch": lambda m: m.numerov_batch(q, energies, r[1] - r[0], 1e-6),
    }


def best_time(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    py = backend_module("python")
    try:
        comp = backend_module("compiled")
    except ImportError:
        print("compiled extension not built; run `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':18s} {'python [s]':>11s} {'compiled [s]':>13s} {'speedup':>8s} {'max diff':>10s}")
    for name, call in _cases(rng).items():
        tp, a = best_time(lambda: call(py), args.repeat)
        tc, b = best_time(lambda: call(comp), args.repeat)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))) / max(np.max(np.abs(a)), 1e-300))
        print(f"{name:18s} {tp:11.4f} {tc:13.4f} {tp / tc:8.2f} {diff:10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
