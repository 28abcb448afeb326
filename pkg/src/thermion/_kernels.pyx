# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, pow, fabs

cnp.import_array()

cdef double RESCALE_AT = 1e150
RESCALE_AT_PY = RESCALE_AT


def helmholtz_matrix(nodes, left, right, double kappa, int power, diag):
    cdef double[:, ::1] x = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double complex[::1] lv = np.ascontiguousarray(left, dtype=np.complex128)
    cdef double complex[::1] rv = np.ascontiguousarray(right, dtype=np.complex128)
    cdef double complex[::1] dv = np.ascontiguousarray(diag, dtype=np.complex128)
    cdef Py_ssize_t n = x.shape[0], i, j
    out_arr = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double dx, dy, dz, d, mag
    cdef double complex ker
    with nogil:
        for i in range(n):
            for j in range(n):
                if i == j:
                    out[i, j] = dv[i]
                    continue
                dx = x[i, 0] - x[j, 0]
                dy = x[i, 1] - x[j, 1]
                dz = x[i, 2] - x[j, 2]
                d = sqrt(dx * dx + dy * dy + dz * dz)
                mag = pow(d, power - 1)
                ker = mag * cos(kappa * d) + 1j * mag * sin(kappa * d)
                out[i, j] = lv[i] * ker * rv[j]
    return out_arr


def helmholtz_apply(targets, sources, coeff, double kappa, int power):
    cdef double[:, ::1] t = np.ascontiguousarray(targets, dtype=np.float64)
    cdef double[:, ::1] s = np.ascontiguousarray(sources, dtype=np.float64)
    cdef double complex[::1] c = np.ascontiguousarray(coeff, dtype=np.complex128)
    cdef Py_ssize_t m = t.shape[0], n = s.shape[0], i, j
    out_arr = np.empty(m, dtype=np.complex128)
    cdef double complex[::1] out = out_arr
    cdef double dx, dy, dz, d, mag
    cdef double complex acc
    with nogil:
        for i in range(m):
            acc = 0
            for j in range(n):
                dx = t[i, 0] - s[j, 0]
                dy = t[i, 1] - s[j, 1]
                dz = t[i, 2] - s[j, 2]
                d = sqrt(dx * dx + dy * dy + dz * dz)
                if d == 0.0:
                    continue
                mag = pow(d, power - 1)
                acc = acc + (mag * cos(kappa * d) + 1j * mag * sin(kappa * d)) * c[j]
            out[i] = acc
    return out_arr


def numerov_batch(q, energies, double h, double start, double origin=0.0):
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64)
    cdef double[::1] e = np.ascontiguousarray(energies, dtype=np.float64)
    cdef Py_ssize_t npts = qv.shape[0], ne = e.shape[0], i, j, l
    out_arr = np.zeros((ne, npts), dtype=np.float64)
    cdef double[:, ::1] u = out_arr
    cdef double c = h * h / 12.0
    cdef double y, d, f
    with nogil:
        for j in range(ne):
            u[j, 1] = start
            y = (1.0 - c * (qv[1] - e[j])) * start
            d = y - origin
            for i in range(1, npts - 1):
                d = d + 12.0 * c * (qv[i] - e[j]) * u[j, i]
                y = y + d
                u[j, i + 1] = y / (1.0 - c * (qv[i + 1] - e[j]))
                if fabs(u[j, i + 1]) > RESCALE_AT:
                    for l in range(i + 2):
                        u[j, l] = u[j, l] / RESCALE_AT
                    y = y / RESCALE_AT
                    d = d / RESCALE_AT
    return out_arr
