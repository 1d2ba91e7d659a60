"""Weighted L2 inner products and the projection onto holomorphic polynomials.

The holomorphic subspace of L2(domain, e^-psi dV) is truncated to polynomials
of total degree <= d.  Monomials are ordered graded-lexicographically, their
Gram matrix under the weighted inner product is assembled in node chunks with
fixed-order compensated accumulation, and an orthonormal basis is extracted
by pivoted Cholesky with a drop tolerance.  The projection of an arbitrary
node-sampled function is its weighted best approximation in that basis.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import BerglabError, ConfigError, DivergenceError, WeightOverflowError
from .quadrature import EVAL_CHUNK, eval_over_nodes, weighted_sum

DEFAULT_DROP_TOL_FACTOR = 1e-12


@dataclass(frozen=True)
class HoloPoly:
    """Holomorphic polynomial: multi-index -> complex coefficient."""

    coeffs: tuple  # of (alpha tuple, complex)
    dim: int

    @staticmethod
    def from_dict(d, dim):
        items = []
        for alpha, c in d.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != dim or any(a < 0 for a in alpha):
                raise ConfigError(f"bad multi-index {alpha}")
            c = complex(c)
            if c != 0:
                items.append((alpha, c))
        items.sort(key=lambda it: (sum(it[0]), it[0]))
        return HoloPoly(coeffs=tuple(items), dim=dim)

    def as_dict(self):
        return {alpha: c for alpha, c in self.coeffs}

    @property
    def degree(self):
        return max((sum(a) for a, _ in self.coeffs), default=0)

    def __sub__(self, other):
        d = self.as_dict()
        for alpha, c in other.coeffs:
            d[alpha] = d.get(alpha, 0.0) - c
        return HoloPoly.from_dict(d, self.dim)

    def coeff_norm(self):
        """Euclidean norm of the coefficient vector."""
        return math.sqrt(math.fsum(abs(c) ** 2 for _, c in self.coeffs))

    def to_config(self):
        return {
            "coeffs": [
                {"alpha": list(alpha), "re": c.real, "im": c.imag}
                for alpha, c in self.coeffs
            ]
        }

    @staticmethod
    def from_config(d, dim):
        return HoloPoly.from_dict(
            {tuple(t["alpha"]): complex(t.get("re", 0.0), t.get("im", 0.0)) for t in d["coeffs"]},
            dim,
        )


def poly_const(value, dim=1):
    return HoloPoly.from_dict({(0,) * dim: value}, dim)


def poly_coordinate(j=0, dim=1, power=1):
    alpha = [0] * dim
    alpha[j] = power
    return HoloPoly.from_dict({tuple(alpha): 1.0}, dim)


def eval_poly_values(p, Z):
    """Vectorized evaluation of the polynomial at an (N, n) point array."""
    Z = np.asarray(Z, dtype=np.complex128)
    if Z.ndim == 1:
        Z = Z.reshape(-1, 1) if p.dim == 1 else Z.reshape(1, -1)
    if not p.coeffs:
        return np.zeros(Z.shape[0], dtype=np.complex128)
    alphas = np.array([a for a, _ in p.coeffs], dtype=np.int64)
    cs = np.array([c for _, c in p.coeffs], dtype=np.complex128)
    V = kernels.monomial_matrix(np.ascontiguousarray(Z), np.ascontiguousarray(alphas))
    return V @ cs


def eval_poly(p, z):
    """Polynomial value at a single point."""
    Z = np.asarray(z, dtype=np.complex128)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1)
    else:
        Z = Z.reshape(1, -1)
    return complex(eval_poly_values(p, Z)[0])


def graded_monomials(dim, degree):
    """All multi-indices with |alpha| <= degree in graded-lex order."""
    out = []
    if dim == 1:
        out = [(k,) for k in range(degree + 1)]
    else:
        for total in range(degree + 1):
            for a1 in range(total, -1, -1):
                out.append((a1, total - a1))
        out.sort(key=lambda a: (sum(a), a))
    return out


class WeightedSpace:
    """L2 space over a quadrature rule with node measure w_i * e^-psi(z_i).

    Construction fails with a divergence/overflow report when the density is
    not finite at a node (the weight then needs truncation for this rule).
    """

    def __init__(self, domain, rule, density, weight=None, label=""):
        density = np.asarray(density, dtype=np.float64)
        if density.shape[0] != rule.node_count:
            raise ConfigError("density length does not match the rule")
        if not np.isfinite(density).all():
            idx = int(np.argmax(~np.isfinite(density)))
            raise WeightOverflowError(idx, float("nan"))
        if np.any(density < 0):
            raise ConfigError("node measure must be nonnegative")
        total = kernels.comp_dot_real(
            np.ascontiguousarray(rule.weights), np.ascontiguousarray(density)
        )
        if not math.isfinite(total):
            raise DivergenceError("total weighted mass of the space is not finite")
        self.domain = domain
        self.rule = rule
        self.density = density  # e^-psi at nodes (or any nonnegative density)
        self.measure = rule.weights * density
        self.weight = weight
        self.label = label

    @staticmethod
    def from_weight(domain, weight, rule):
        psi_v = weight.evaluate(rule.nodes)
        with np.errstate(over="raise"):
            try:
                density = np.exp(-psi_v)
            except FloatingPointError:
                over = np.flatnonzero(-psi_v > 700)
                raise WeightOverflowError(over[0] if over.size else -1, float(psi_v[over[0]]))
        if not np.isfinite(density).all():
            idx = int(np.argmax(~np.isfinite(density)))
            raise WeightOverflowError(idx, float(psi_v[idx]))
        return WeightedSpace(domain, rule, density, weight=weight)

    def inner(self, u_values, v_values):
        """<u, v> = integral of u * conj(v) * e^-psi dV."""
        u = np.asarray(u_values)
        v = np.asarray(v_values)
        p = (u * np.conj(v)).astype(np.complex128)
        if not (np.isfinite(p.real).all() and np.isfinite(p.imag).all()):
            idx = int(np.argmax(~(np.isfinite(p.real) & np.isfinite(p.imag))))
            raise BerglabError(f"inner-product integrand not finite at node {idx}")
        return kernels.comp_dot_complex(
            np.ascontiguousarray(self.measure), np.ascontiguousarray(p)
        )

    def norm_sq(self, values):
        with np.errstate(over="ignore"):
            v = np.abs(np.asarray(values)) ** 2
        if not np.isfinite(v).all():
            raise DivergenceError("squared norm overflows at a node")
        return float(
            kernels.comp_dot_real(
                np.ascontiguousarray(self.measure),
                np.ascontiguousarray(v, dtype=np.float64),
            )
        )

    def norm(self, values):
        return math.sqrt(max(self.norm_sq(values), 0.0))


def weighted_inner(space, u, v):
    """Weighted inner product of two functions (callables or node arrays)."""
    uv = eval_over_nodes(space.rule, u) if callable(u) else np.asarray(u)
    vv = eval_over_nodes(space.rule, v) if callable(v) else np.asarray(v)
    return space.inner(uv, vv)


def weighted_norm(space, h):
    """sqrt(<h, h>) in the weighted space."""
    hv = eval_over_nodes(space.rule, h) if callable(h) else np.asarray(h)
    return space.norm(hv)


def monomial_values(rule, alphas, chunk=EVAL_CHUNK):
    """Iterator of (slice, V) monomial-matrix chunks over the rule's nodes."""
    A = np.ascontiguousarray(np.asarray(alphas, dtype=np.int64))
    N = rule.node_count
    for a in range(0, N, chunk):
        b = min(a + chunk, N)
        V = kernels.monomial_matrix(np.ascontiguousarray(rule.nodes[a:b]), A)
        yield slice(a, b), V


def gram_matrix(space, degree):
    """Hermitian Gram matrix of monomials |alpha| <= degree, graded-lex order.

    Assembled in node chunks; chunk partials are merged in chunk order with
    Neumaier compensation, and the strict lower triangle is mirrored from the
    upper one so the result is exactly Hermitian.
    """
    alphas = graded_monomials(space.domain.n, degree)
    K = len(alphas)
    G = np.zeros((K, K), dtype=np.complex128)
    comp = np.zeros((K, K), dtype=np.complex128)
    for sl, V in monomial_values(space.rule, alphas):
        Vw = V * space.measure[sl][:, None]
        partial = V.conj().T @ Vw
        # elementwise Neumaier merge, fixed chunk order
        t = G + partial
        big = np.abs(G) >= np.abs(partial)
        comp += np.where(big, (G - t) + partial, (partial - t) + G)
        G = t
    G = G + comp
    if not np.isfinite(G).all():
        raise DivergenceError("a Gram entry is not finite; weight too singular")
    iu = np.triu_indices(K, 1)
    G[(iu[1], iu[0])] = np.conj(G[iu])
    np.fill_diagonal(G, G.diagonal().real)
    return G


def gram_to_csv(G, alphas, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["alpha_row", "alpha_col", "re", "im"])
        for i, ar in enumerate(alphas):
            for j, ac in enumerate(alphas):
                wr.writerow([str(ar), str(ac), repr(G[i, j].real), repr(G[i, j].imag)])


@dataclass(frozen=True)
class GramFactorization:
    """Orthonormalized monomial basis b_k = sum_alpha B[alpha, k] z^alpha."""

    indices: tuple  # all multi-indices, graded-lex
    retained: tuple  # positions into indices, pivot order
    coeffs: np.ndarray  # (K, rank)
    dropped: tuple  # of (position, pivot magnitude)
    rank: int

    @property
    def retained_indices(self):
        return tuple(self.indices[i] for i in self.retained)


def orthonormalize(G, indices, drop_tol=None, identity_tol=1e-10):
    """Pivoted Cholesky orthonormalization of the monomial Gram matrix.

    Pivots below drop_tol (default 1e-12 times the largest diagonal entry)
    are dropped and reported.  A diagonal entry below -drop_tol is a hard
    error: the quadrature and the weight are inconsistent.  After the
    factorization the rank is trimmed until the defining property
    B^H G B = I holds within identity_tol in Frobenius norm (a pivot just
    above drop_tol can be too marginal to invert accurately); trimmed pivots
    are reported as dropped too.
    """
    G = np.asarray(G, dtype=np.complex128)
    K = G.shape[0]
    if G.shape != (K, K):
        raise ConfigError("Gram matrix must be square")
    if drop_tol is None:
        drop_tol = DEFAULT_DROP_TOL_FACTOR * float(np.max(G.diagonal().real))
    A = G.copy()
    piv = np.arange(K)
    rank = K
    for i in range(K):
        d = A.diagonal().real[i:]
        if d.size and float(d.min()) < -abs(drop_tol):
            raise BerglabError(
                "Gram matrix has a negative pivot beyond the drop tolerance; "
                "the quadrature rule is inconsistent with the weight"
            )
        j = i + int(np.argmax(d))
        if A[j, j].real <= drop_tol:
            rank = i
            break
        if j != i:
            A[:, [i, j]] = A[:, [j, i]]
            A[[i, j], :] = A[[j, i], :]
            piv[[i, j]] = piv[[j, i]]
        A[i, i] = math.sqrt(A[i, i].real)
        A[i + 1 :, i] /= A[i, i].real
        A[i + 1 :, i + 1 :] -= np.outer(A[i + 1 :, i], np.conj(A[i + 1 :, i]))

    dropped = [(int(piv[i]), float(A[i, i].real)) for i in range(rank, K)]
    L1 = np.tril(A[:rank, :rank])
    Binv = np.linalg.solve(L1.conj().T, np.eye(rank, dtype=np.complex128))
    B = np.zeros((K, rank), dtype=np.complex128)
    B[piv[:rank], :] = Binv
    if rank:
        R = B.conj().T @ G @ B
        while rank > 0:
            resid = np.linalg.norm(R[:rank, :rank] - np.eye(rank))
            if resid <= identity_tol:
                break
            rank -= 1
            dropped.insert(0, (int(piv[rank]), float(L1[rank, rank].real) ** 2))
        B = B[:, :rank]
    return GramFactorization(
        indices=tuple(indices),
        retained=tuple(int(p) for p in piv[:rank]),
        coeffs=B,
        dropped=tuple(dropped),
        rank=rank,
    )


@dataclass(frozen=True)
class ProjectionResult:
    poly: HoloPoly
    coefficients: np.ndarray  # in the orthonormal basis
    orthogonality_residual: float  # max_k |<h - g, b_k>|
    input_norm: float  # ||h|| in the weighted space


def project(space, fac, h, residual_tol=1e-8):
    """Weighted orthogonal projection of h onto the retained polynomial span.

    Returns the projection in monomial coefficients.  The orthogonality of
    the residual h - g against every retained basis element is re-verified by
    quadrature (not by the algebra that produced the coefficients); a
    violation beyond residual_tol * ||h|| raises.
    """
    hv = eval_over_nodes(space.rule, h) if callable(h) else np.asarray(h, dtype=np.complex128)
    h_norm_sq = space.norm_sq(hv)
    if not math.isfinite(h_norm_sq):
        raise DivergenceError("input to the projection has a divergent weighted norm")
    h_norm = math.sqrt(max(h_norm_sq, 0.0))

    K = len(fac.indices)
    moments = np.zeros(K, dtype=np.complex128)
    mcomp = np.zeros(K, dtype=np.complex128)
    wh = space.measure * hv
    for sl, V in monomial_values(space.rule, fac.indices):
        partial = V.conj().T @ wh[sl]
        t = moments + partial
        big = np.abs(moments) >= np.abs(partial)
        mcomp += np.where(big, (moments - t) + partial, (partial - t) + moments)
        moments = t
    moments = moments + mcomp

    c = fac.coeffs.conj().T @ moments
    mono = fac.coeffs @ c
    poly = HoloPoly.from_dict(
        {alpha: mono[i] for i, alpha in enumerate(fac.indices) if mono[i] != 0},
        space.domain.n,
    )

    gv = eval_poly_values(poly, space.rule.nodes)
    resid_m = np.zeros(fac.rank, dtype=np.complex128)
    wr = space.measure * (hv - gv)
    for sl, V in monomial_values(space.rule, fac.indices):
        resid_m += (V @ fac.coeffs).conj().T @ wr[sl]
    residual = float(np.max(np.abs(resid_m))) if fac.rank else 0.0
    if h_norm > 0 and residual > residual_tol * h_norm:
        raise BerglabError(
            f"projection residual {residual:.3e} exceeds "
            f"{residual_tol:.1e} * ||h|| = {residual_tol * h_norm:.3e}"
        )
    return ProjectionResult(
        poly=poly,
        coefficients=c,
        orthogonality_residual=residual,
        input_norm=h_norm,
    )
