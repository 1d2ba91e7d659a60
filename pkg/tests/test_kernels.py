import math

import numpy as np
import pytest

from berglab._backend import get_kernels
from berglab import _kernels_py

try:
    from berglab import _kernels as _compiled
except ImportError:
    _compiled = None

needs_compiled = pytest.mark.skipif(_compiled is None, reason="extension not built")


def test_fallback_matches_fsum():
    rng = np.random.default_rng(1)
    w = rng.uniform(0, 1, 1000)
    v = rng.normal(size=1000)
    assert _kernels_py.comp_dot_real(w, v) == math.fsum(w * v)


def _cancellation_case():
    # naive left-to-right summation loses the small term entirely
    v = np.array([1e16, 1.0, -1e16] * 1000)
    w = np.ones(v.size)
    return w, v, 1000.0


def test_fallback_compensation_beats_naive():
    w, v, exact = _cancellation_case()
    assert float(np.sum(w * v)) != exact
    assert _kernels_py.comp_dot_real(w, v) == exact


@needs_compiled
def test_compiled_compensation():
    w, v, exact = _cancellation_case()
    assert _compiled.comp_dot_real(w, np.ascontiguousarray(v)) == exact


@needs_compiled
def test_backend_parity_dot():
    rng = np.random.default_rng(2)
    w = rng.uniform(0, 2, 200000)
    v = rng.normal(size=200000) + 1j * rng.normal(size=200000)
    a = _compiled.comp_dot_complex(w, np.ascontiguousarray(v))
    b = _kernels_py.comp_dot_complex(w, v)
    assert a == pytest.approx(b, rel=1e-14)
    ar = _compiled.comp_dot_real(w, np.ascontiguousarray(v.real))
    br = _kernels_py.comp_dot_real(w, v.real)
    assert ar == pytest.approx(br, rel=1e-14)


@needs_compiled
def test_backend_parity_monomials():
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(4096, 2)) + 1j * rng.normal(size=(4096, 2))
    Z = np.ascontiguousarray(Z)
    alphas = np.ascontiguousarray(
        np.array([[0, 0], [1, 0], [0, 1], [3, 2], [7, 0], [2, 9]], dtype=np.int64)
    )
    Vc = _compiled.monomial_matrix(Z, alphas)
    Vp = _kernels_py.monomial_matrix(Z, alphas)
    scale = np.abs(Vp).max()
    assert np.abs(Vc - Vp).max() <= 1e-12 * scale


def test_backend_determinism():
    rng = np.random.default_rng(4)
    w = rng.uniform(0, 1, 50000)
    v = rng.normal(size=50000) + 1j * rng.normal(size=50000)
    k = get_kernels()
    a = k.comp_dot_complex(np.ascontiguousarray(w), np.ascontiguousarray(v))
    b = k.comp_dot_complex(np.ascontiguousarray(w), np.ascontiguousarray(v))
    assert a == b


def test_get_kernels_selector():
    assert get_kernels("python") is _kernels_py
    with pytest.raises(ValueError):
        get_kernels("fortran")
