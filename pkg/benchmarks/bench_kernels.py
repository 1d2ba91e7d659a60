#!/usr/bin/env python3
"""Benchmark of the compiled kernels against the numpy/fsum fallback.

The kernels are the hot loops of every weighted integral and Gram assembly:
fixed-order compensated reductions over quadrature nodes and monomial matrix
evaluation.  Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from berglab._backend import get_kernels


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    try:
        compiled = get_kernels("cython")
    except ImportError:
        print("compiled extension not built; run pip install -e . --no-build-isolation")
        return 1
    fallback = get_kernels("python")

    rng = np.random.default_rng(0)
    n = 1_000_000
    w = np.ascontiguousarray(rng.uniform(0.0, 1.0, n))
    vr = np.ascontiguousarray(rng.normal(size=n))
    vc = np.ascontiguousarray(rng.normal(size=n) + 1j * rng.normal(size=n))

    nodes = 65_536
    Z = np.ascontiguousarray(rng.normal(size=(nodes, 2)) + 1j * rng.normal(size=(nodes, 2)))
    alphas = []
    for total in range(11):
        for a1 in range(total + 1):
            alphas.append((a1, total - a1))
    alphas = np.ascontiguousarray(np.array(alphas, dtype=np.int64))

    cases = [
        (f"comp_dot_real        n={n}", lambda k: k.comp_dot_real(w, vr)),
        (f"comp_dot_complex     n={n}", lambda k: k.comp_dot_complex(w, vc)),
        (
            f"monomial_matrix      {nodes} nodes x {len(alphas)} indices",
            lambda k: k.monomial_matrix(Z, alphas),
        ),
    ]

    print(f"{'kernel':<45} {'cython':>10} {'python':>10} {'speedup':>9}")
    for name, call in cases:
        tc = timeit(lambda: call(compiled))
        tp = timeit(lambda: call(fallback))
        print(f"{name:<45} {tc * 1e3:9.2f}ms {tp * 1e3:9.2f}ms {tp / tc:8.1f}x")

    # agreement sanity
    a = compiled.comp_dot_complex(w, vc)
    b = fallback.comp_dot_complex(w, vc)
    print(f"\nbackend agreement (comp_dot_complex): |diff| = {abs(a - b):.3e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
