# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled reduction and evaluation kernels.

Hot loops of the package: fixed-order Neumaier-compensated reductions over
quadrature nodes and monomial matrix evaluation.  A numpy fallback with the
same signatures lives in ``berglab._kernels_py``.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def comp_dot_real(double[::1] w, double[::1] v):
    """Neumaier-compensated sum of w[i] * v[i] in index order."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double s = 0.0, c = 0.0, t, x
    for i in range(n):
        x = w[i] * v[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def comp_dot_complex(double[::1] w, double complex[::1] v):
    """Neumaier-compensated sum of w[i] * v[i] in index order, v complex."""
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double sr = 0.0, cr = 0.0, si = 0.0, ci = 0.0
    cdef double t, xr, xi
    for i in range(n):
        xr = w[i] * v[i].real
        xi = w[i] * v[i].imag
        t = sr + xr
        if abs(sr) >= abs(xr):
            cr += (sr - t) + xr
        else:
            cr += (xr - t) + sr
        sr = t
        t = si + xi
        if abs(si) >= abs(xi):
            ci += (si - t) + xi
        else:
            ci += (xi - t) + si
        si = t
    return complex(sr + cr, si + ci)


def comp_sum_real(double[::1] v):
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double s = 0.0, c = 0.0, t, x
    for i in range(n):
        x = v[i]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


def monomial_matrix(double complex[:, ::1] Z, long[:, ::1] alphas):
    """Evaluate z^alpha for each node (row) and multi-index (column)."""
    cdef Py_ssize_t N = Z.shape[0], n = Z.shape[1], K = alphas.shape[0]
    cdef Py_ssize_t i, j, k, p, dmax
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] V = np.ones((N, K), dtype=np.complex128)
    cdef double complex[:, ::1] Vv = V
    cdef double complex[:, ::1] pow_tab
    cdef double complex z
    for j in range(n):
        dmax = 0
        for k in range(K):
            if alphas[k, j] > dmax:
                dmax = alphas[k, j]
        pow_tab = np.empty((N, dmax + 1), dtype=np.complex128)
        for i in range(N):
            pow_tab[i, 0] = 1.0
            z = Z[i, j]
            for p in range(1, dmax + 1):
                pow_tab[i, p] = pow_tab[i, p - 1] * z
        for k in range(K):
            p = alphas[k, j]
            for i in range(N):
                Vv[i, k] = Vv[i, k] * pow_tab[i, p]
    return V
