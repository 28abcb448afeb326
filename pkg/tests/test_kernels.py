import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thermion import kernels
from thermion.kernels import backend_module

py = backend_module("python")
try:
    compiled = backend_module("compiled")
except ImportError:  # pragma: no cover
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _points(seed, n, spread=1.0):
    return np.random.default_rng(seed).uniform(-spread, spread, (n, 3))


def test_helmholtz_matrix_against_loops():
    rng = np.random.default_rng(3)
    x = _points(0, 5)
    left, right = rng.standard_normal(5), rng.standard_normal(5)
    diag = rng.standard_normal(5) + 1j
    M = py.helmholtz_matrix(x, left, right, 1.7, 0, diag)
    for i in range(5):
        for j in range(5):
            if i == j:
                ref = diag[i]
            else:
                d = np.linalg.norm(x[i] - x[j])
                ref = left[i] * np.exp(1.7j * d) / d * right[j]
            assert M[i, j] == pytest.approx(ref, rel=1e-14)


def test_helmholtz_apply_skips_coincident_points():
    x = _points(1, 4)
    c = np.arange(1, 5) + 0j
    out = py.helmholtz_apply(x[:1], x, c, 0.5, 0)
    d = np.linalg.norm(x[0] - x[1:], axis=1)
    assert out[0] == pytest.approx(np.sum(np.exp(0.5j * d) / d * c[1:]), rel=1e-14)


def test_numerov_free_solution_is_sine():
    r = np.linspace(0.0, 10.0, 20001)
    h = r[1] - r[0]
    k = np.array([0.5, 1.0, 2.0])
    u = py.numerov_batch(np.zeros_like(r), k**2, h, 1.0)
    ref = np.sin(k[:, None] * r[None, :]) / np.sin(k * h)[:, None]
    np.testing.assert_allclose(u, ref, atol=1e-7 * np.abs(ref).max())


def test_numerov_rescales_growing_columns():
    r = np.linspace(0.0, 60.0, 6001)
    u = py.numerov_batch(np.full_like(r, 100.0), np.array([0.0]), r[1] - r[0], 1e-6)
    assert np.isfinite(u).all() and np.abs(u).max() <= 1e151


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), kappa=st.floats(0.0, 8.0), power=st.sampled_from([0, 1, 2]),
       seed=st.integers(0, 2**16))
def test_helmholtz_backends_agree(n, kappa, power, seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, (n, 3))
    left, right = rng.standard_normal(n), rng.standard_normal(n)
    diag = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = py.helmholtz_matrix(x, left, right, kappa, power, diag)
    b = compiled.helmholtz_matrix(x, left, right, kappa, power, diag)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-14 * np.abs(a).max())
    t = rng.uniform(-2, 2, (7, 3))
    coeff = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    a = py.helmholtz_apply(t, x, coeff, kappa, power)
    b = compiled.helmholtz_apply(t, x, coeff, kappa, power)
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-13 * np.abs(coeff).sum())


@needs_compiled
@settings(max_examples=25, deadline=None)
@given(depth=st.floats(0.0, 50.0), ell=st.integers(0, 3), e_max=st.floats(0.1, 60.0))
def test_numerov_backends_agree(depth, ell, e_max):
    r = np.linspace(0.0, 8.0, 1601)
    q = np.zeros_like(r)
    q[1:] = -depth * np.exp(-r[1:] ** 2) + ell * (ell + 1) / r[1:] ** 2
    e = np.linspace(-depth, e_max, 9)
    origin = 1e-6 / 6.0 if ell == 1 else 0.0
    a = py.numerov_batch(q, e, r[1] - r[0], 1e-6, origin)
    b = compiled.numerov_batch(q, e, r[1] - r[0], 1e-6, origin)
    np.testing.assert_allclose(b, a, rtol=1e-11, atol=1e-13 * np.abs(a).max())


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("THERMION_PURE_PYTHON", None)
    if env_value is not None:
        env["THERMION_PURE_PYTHON"] = env_value
    out = subprocess.run([sys.executable, "-c", "from thermion import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_environment_forces_fallback():
    assert _backend_in_subprocess("1") == "python"


@needs_compiled
def test_compiled_selected_by_default():
    assert _backend_in_subprocess(None) == "compiled"
    assert kernels.BACKEND in ("compiled", "python")
