"""Pure-Python/numpy fallback for the compiled reduction kernels.

Same call signatures as the Cython module ``berglab._kernels``.  Reductions
use ``math.fsum`` (exactly rounded, hence order-independent and
deterministic); monomial matrices are built from per-coordinate power tables.
"""

import math

import numpy as np

BACKEND_NAME = "python"


def comp_dot_real(w, v):
    """Deterministic compensated sum of w[i] * v[i], both real."""
    p = np.asarray(w, dtype=np.float64) * np.asarray(v, dtype=np.float64)
    return math.fsum(p)


def comp_dot_complex(w, v):
    """Deterministic compensated sum of w[i] * v[i], v complex."""
    p = np.asarray(v, dtype=np.complex128) * np.asarray(w, dtype=np.float64)
    return complex(math.fsum(p.real), math.fsum(p.imag))


def comp_sum_real(v):
    return math.fsum(np.asarray(v, dtype=np.float64))


def monomial_matrix(Z, alphas):
    """Evaluate z^alpha for each node (row) and multi-index (column).

    Z: (N, n) complex nodes; alphas: (K, n) nonnegative integer exponents.
    Returns (N, K) complex128.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    alphas = np.asarray(alphas, dtype=np.int64)
    N, n = Z.shape
    K = alphas.shape[0]
    V = np.ones((N, K), dtype=np.complex128)
    for j in range(n):
        dmax = int(alphas[:, j].max()) if K else 0
        pow_tab = np.empty((N, dmax + 1), dtype=np.complex128)
        pow_tab[:, 0] = 1.0
        for p in range(1, dmax + 1):
            np.multiply(pow_tab[:, p - 1], Z[:, j], out=pow_tab[:, p])
        V *= pow_tab[:, alphas[:, j]]
    return V
