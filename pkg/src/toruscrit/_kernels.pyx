# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled trigonometric-sum kernels.

Mirrors toruscrit._kernels_py; serial loops keep results independent of any
BLAS threading.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

BACKEND_NAME = "cython"


def trig_jet(points, freqs, coef_cos, coef_sin, double const, int order):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] frq = np.ascontiguousarray(freqs, dtype=np.float64)
    cdef double[::1] cc = np.ascontiguousarray(coef_cos, dtype=np.float64)
    cdef double[::1] cs = np.ascontiguousarray(coef_sin, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0]
    cdef Py_ssize_t m = pts.shape[1]
    cdef Py_ssize_t nl = frq.shape[0]

    value_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] value = value_arr
    grad_arr = hess_arr = None
    cdef double[:, ::1] grad = None
    cdef double[:, :, ::1] hess = None
    if order >= 1:
        grad_arr = np.zeros((n, m), dtype=np.float64)
        grad = grad_arr
    if order >= 2:
        hess_arr = np.zeros((n, m, m), dtype=np.float64)
        hess = hess_arr

    cdef Py_ssize_t i, l, j, k
    cdef double ph, cv, sv, acc, mix, neg, fj
    for i in range(n):
        acc = const
        for l in range(nl):
            ph = 0.0
            for j in range(m):
                ph += frq[l, j] * pts[i, j]
            cv = cos(ph)
            sv = sin(ph)
            acc += cc[l] * cv + cs[l] * sv
            if order >= 1:
                mix = -cc[l] * sv + cs[l] * cv
                for j in range(m):
                    grad[i, j] += mix * frq[l, j]
            if order >= 2:
                neg = -(cc[l] * cv + cs[l] * sv)
                for j in range(m):
                    fj = neg * frq[l, j]
                    for k in range(j, m):
                        hess[i, j, k] += fj * frq[l, k]
        value[i] = acc
    if order >= 2:
        for i in range(n):
            for j in range(m):
                for k in range(j):
                    hess[i, j, k] = hess[i, k, j]
    return value_arr, grad_arr, hess_arr


def count_sign_changes(values):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, cnt = 0
    cdef double a, b
    for i in range(n):
        a = v[i]
        b = v[(i + 1) % n]
        if (a > 0 and b <= 0) or (a < 0 and b >= 0) or (a == 0 and b != 0):
            cnt += 1
    return cnt
