"""Pure numpy implementations of the hot loops.

Same signatures and results as the compiled ``_kernels`` module; selected at
import time when the extension is missing or THERMION_PURE_PYTHON is set.
"""

import numpy as np

RESCALE_AT = 1e150

_BLOCK = 512


def helmholtz_matrix(nodes, left, right, kappa, power, diag):
    """M[i, j] = left[i] * exp(i kappa r_ij) * r_ij**(power-1) * right[j], M[i, i] = diag[i]."""
    nodes = np.ascontiguousarray(nodes, dtype=float)
    left = np.asarray(left, dtype=complex)
    right = np.asarray(right, dtype=complex)
    n = len(nodes)
    out = np.empty((n, n), dtype=complex)
    for s in range(0, n, _BLOCK):
        blk = nodes[s:s + _BLOCK]
        d = np.sqrt(((blk[:, None, :] - nodes[None, :, :]) ** 2).sum(-1))
        idx = np.arange(len(blk))
        d[idx, s + idx] = 1.0
        ker = np.exp(1j * kappa * d) * d ** (power - 1)
        out[s:s + _BLOCK] = left[s:s + _BLOCK, None] * ker * right[None, :]
        out[s + idx, s + idx] = diag[s:s + _BLOCK]
    return out


def helmholtz_apply(targets, sources, coeff, kappa, power):
    """out[i] = sum_j exp(i kappa r_ij) * r_ij**(power-1) * coeff[j], skipping r_ij == 0."""
    targets = np.ascontiguousarray(targets, dtype=float)
    sources = np.ascontiguousarray(sources, dtype=float)
    coeff = np.asarray(coeff, dtype=complex)
    out = np.empty(len(targets), dtype=complex)
    for s in range(0, len(targets), _BLOCK):
        blk = targets[s:s + _BLOCK]
        d = np.sqrt(((blk[:, None, :] - sources[None, :, :]) ** 2).sum(-1))
        hit = d == 0.0
        d[hit] = 1.0
        ker = np.exp(1j * kappa * d) * d ** (power - 1)
        ker[hit] = 0.0
        out[s:s + _BLOCK] = ker @ coeff
    return out


def numerov_batch(q, energies, h, start, origin=0.0):
    """Integrate u'' = (q(r) - e) u outward on a uniform grid for every e.

    q has length npts with q[0] ignored (u[0] = 0); ``origin`` is the limit of
    (1 - h^2 f/12) u at r = 0, nonzero only for l = 1.  Returns u with shape
    (len(energies), npts).  Columns that grow past RESCALE_AT are rescaled
    in place, so the earliest samples of fast-growing solutions underflow to
    zero rather than the tail overflowing.
    """
    q = np.asarray(q, dtype=float)
    e = np.asarray(energies, dtype=float)
    npts = len(q)
    ne = len(e)
    u = np.zeros((npts, ne))
    c = h * h / 12.0
    # difference form of Numerov: y = (1 - c f) u, d_i = y_i - y_{i-1}
    u[1] = start
    y = (1.0 - c * (q[1] - e)) * start
    d = y - origin
    for i in range(1, npts - 1):
        d = d + 12.0 * c * (q[i] - e) * u[i]
        y = y + d
        u[i + 1] = y / (1.0 - c * (q[i + 1] - e))
        big = np.abs(u[i + 1]) > RESCALE_AT
        if big.any():
            u[: i + 2, big] /= RESCALE_AT
            y[big] /= RESCALE_AT
            d[big] /= RESCALE_AT
    return np.ascontiguousarray(u.T)
