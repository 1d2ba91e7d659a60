"""Model domains in C^n (n <= 2) and deterministic numerical integration.

Domains are the disc, the polydisc and the ball (the ball by indicator
restriction of a polydisc rule).  Rules are tensor products of per-coordinate
polar rules: Gauss-Legendre panels in radius times a uniform angular grid.
Radial panels can be subdivided dyadically toward a coordinate origin (for
integrands singular on a coordinate hyperplane) and split at caller-supplied
breakpoints (for integrands with known radial kinks).

All reductions are fixed-order and compensated, so results are bit-stable
across runs for a given backend.
"""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from ._backend import kernels
from .errors import (
    BerglabError,
    ConfigError,
    NonFiniteIntegrandError,
    ResourceLimitError,
)

DEFAULT_NODE_CAP = 2 ** 24
EVAL_CHUNK = 1 << 16

# Dyadic-shell classifier thresholds.  The dead zone is +-0.1 on the fitted
# slope; the fuzz keeps boundary-exact slopes (a model family can sit exactly
# on 0.1) from flapping into Undecided on roundoff.
SLOPE_DEAD_ZONE = 0.1
SLOPE_FUZZ = 1e-6
NONDECAY_MIN_RATIO = 0.5


def _workers():
    try:
        w = int(os.environ.get("BERGLAB_WORKERS", "0"))
    except ValueError:
        w = 0
    if w <= 0:
        w = os.cpu_count() or 1
    return w


@dataclass(frozen=True)
class Domain:
    """A model domain: disc (n=1), polydisc (n=2) or ball (n=2)."""

    kind: str
    radii: tuple
    n: int

    @property
    def volume(self):
        """Closed-form Lebesgue volume of the domain (real dimension 2n)."""
        if self.kind == "disc":
            return math.pi * self.radii[0] ** 2
        if self.kind == "polydisc":
            return math.pi ** 2 * self.radii[0] ** 2 * self.radii[1] ** 2
        if self.kind == "ball":
            return math.pi ** 2 * self.radii[0] ** 4 / 2.0
        raise ConfigError(f"unknown domain kind {self.kind!r}")


_DOMAIN_ARITY = {"disc": 1, "polydisc": 2, "ball": 1}
_DOMAIN_DIM = {"disc": 1, "polydisc": 2, "ball": 2}


def build_domain(kind, radii):
    """Construct a Domain; validates arity and positivity of the radii."""
    kind = str(kind).lower()
    if kind not in _DOMAIN_ARITY:
        raise ConfigError(f"unknown domain kind {kind!r}")
    radii = tuple(float(r) for r in (radii if hasattr(radii, "__len__") else (radii,)))
    if len(radii) != _DOMAIN_ARITY[kind]:
        raise ConfigError(
            f"{kind} takes {_DOMAIN_ARITY[kind]} radius value(s), got {len(radii)}"
        )
    if any(r <= 0 for r in radii):
        raise ConfigError("all radii must be positive")
    return Domain(kind=kind, radii=radii, n=_DOMAIN_DIM[kind])


def _panel_edges(radius, base_panels, breakpoints, levels, boundary_levels):
    """Sorted radial panel edges on [0, radius].

    base_panels uniform panels, plus a dyadic ladder radius * 2^-l for
    l = 1..levels (every panel then has a bounded hi/lo ratio, which keeps
    Gauss-Legendre spectral on log-type integrands all the way down), plus
    caller breakpoints, plus `boundary_levels` halvings of the outermost
    panel toward the boundary.
    """
    edges = {0.0, float(radius)}
    for i in range(1, int(base_panels)):
        edges.add(radius * i / base_panels)
    for l in range(1, int(levels) + 1):
        edges.add(radius * 0.5 ** l)
    for b in breakpoints or ():
        b = float(b)
        if 0.0 < b < radius:
            edges.add(b)
    edges = sorted(edges)
    for _ in range(int(boundary_levels)):
        last_width = edges[-1] - edges[-2]
        edges.insert(-1, edges[-1] - last_width / 2.0)
    return edges


def _coord_rule(radius, radial_n, angular_n, edges):
    """Polar rule for one complex coordinate on a disc of given radius.

    Returns (z, w): complex nodes and positive weights such that
    sum(w * f(z)) approximates the area integral of f over the disc.
    """
    x, gw = leggauss(int(radial_n))
    rs = []
    ws = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (hi + lo)
        half = 0.5 * (hi - lo)
        r = mid + half * x
        rs.append(r)
        ws.append(half * gw * r)  # polar Jacobian
    r = np.concatenate(rs)
    wr = np.concatenate(ws)
    m = int(angular_n)
    theta = (np.arange(m) + 0.5) * (2.0 * math.pi / m)
    phase = np.exp(1j * theta)
    z = (r[:, None] * phase[None, :]).ravel()
    w = np.repeat(wr * (2.0 * math.pi / m), m)
    return z, w


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights over a model domain, with refinement metadata."""

    domain: Domain
    nodes: np.ndarray  # (N, n) complex128
    weights: np.ndarray  # (N,) float64, all > 0
    levels: int
    resolution: tuple  # (radial_n, angular_n)
    singular_loci: tuple
    coord_edges: tuple  # per-coordinate radial panel edges

    @property
    def node_count(self):
        return self.nodes.shape[0]

    def to_csv(self, path):
        """Dump nodes and weights: re/im per coordinate, then the weight."""
        n = self.domain.n
        header = []
        for j in range(n):
            header += [f"re(z{j + 1})", f"im(z{j + 1})"]
        header.append("weight")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for i in range(self.node_count):
                row = []
                for j in range(n):
                    row += [repr(self.nodes[i, j].real), repr(self.nodes[i, j].imag)]
                row.append(repr(float(self.weights[i])))
                wr.writerow(row)


def _per_coord(value, n, default):
    if value is None:
        return (default,) * n
    if np.isscalar(value):
        return (value,) * n
    value = tuple(value)
    if len(value) != n:
        raise ConfigError(f"expected {n} per-coordinate values, got {len(value)}")
    return value


def _locus_coeffs(locus, n):
    c = tuple(complex(v) for v in locus)
    if len(c) != n or all(v == 0 for v in c):
        raise ConfigError("a singular locus must be a nonzero linear functional")
    return c


def build_quadrature(
    domain,
    radial_n,
    angular_n,
    levels=0,
    singular_loci=(),
    radial_panels=1,
    radial_breakpoints=None,
    boundary_levels=None,
    node_cap=DEFAULT_NODE_CAP,
):
    """Tensor-product polar rule over a model domain.

    radial_n is the Gauss-Legendre order per radial panel and angular_n the
    number of uniform angular nodes, per complex coordinate (scalars or
    per-coordinate tuples).  For levels > 0 radial panels are subdivided
    dyadically toward the origin of every coordinate that carries an aligned
    singular locus (all coordinates when no loci are given).  Breakpoints
    force panel edges at known radial kinks.  The ball is a polydisc rule
    restricted by the indicator, with extra panels graded toward the boundary.
    """
    n = domain.n
    radial_n = _per_coord(radial_n, n, None)
    angular_n = _per_coord(angular_n, n, None)
    panels = _per_coord(radial_panels, n, 1)
    breaks = radial_breakpoints
    if breaks is None:
        breaks = ((),) * n
    elif n == 1 and breaks and np.isscalar(breaks[0]):
        breaks = (tuple(breaks),)
    else:
        breaks = tuple(tuple(b) for b in breaks)
    if len(breaks) != n:
        raise ConfigError("radial_breakpoints must be given per coordinate")
    for rn, an in zip(radial_n, angular_n):
        if int(rn) < 4 or int(an) < 4:
            raise ConfigError("radial_n and angular_n must be at least 4")
    if int(levels) < 0:
        raise ConfigError("levels must be nonnegative")

    loci = tuple(_locus_coeffs(l, n) for l in singular_loci)
    refine = [True] * n
    if loci:
        refine = [False] * n
        for c in loci:
            nz = [j for j, v in enumerate(c) if v != 0]
            if len(nz) == 1:
                refine[nz[0]] = True

    if domain.kind == "ball":
        blv = 6 if boundary_levels is None else int(boundary_levels)
        radii = (domain.radii[0], domain.radii[0])
    else:
        blv = 0 if boundary_levels is None else int(boundary_levels)
        radii = domain.radii

    coord_z = []
    coord_w = []
    coord_edges = []
    total = 1
    for j in range(n):
        lv = int(levels) if refine[j] else 0
        edges = _panel_edges(radii[j], panels[j], breaks[j], lv, blv)
        npanels = len(edges) - 1
        count = npanels * int(radial_n[j]) * int(angular_n[j])
        total *= count
        if total > node_cap:
            raise ResourceLimitError(
                f"rule would use more than node_cap={node_cap} nodes"
            )
        z, w = _coord_rule(radii[j], radial_n[j], angular_n[j], edges)
        coord_z.append(z)
        coord_w.append(w)
        coord_edges.append(tuple(edges))

    if n == 1:
        nodes = coord_z[0][:, None]
        weights = coord_w[0].copy()
    else:
        n1 = coord_z[0].shape[0]
        n2 = coord_z[1].shape[0]
        nodes = np.empty((n1 * n2, 2), dtype=np.complex128)
        nodes[:, 0] = np.repeat(coord_z[0], n2)
        nodes[:, 1] = np.tile(coord_z[1], n1)
        weights = (coord_w[0][:, None] * coord_w[1][None, :]).ravel()

    if domain.kind == "ball":
        r2 = (np.abs(nodes) ** 2).sum(axis=1)
        keep = r2 < domain.radii[0] ** 2
        nodes = np.ascontiguousarray(nodes[keep])
        weights = np.ascontiguousarray(weights[keep])

    for c in loci:
        lv = np.abs(nodes @ np.asarray(c, dtype=np.complex128))
        if lv.size and float(lv.min()) == 0.0:
            raise BerglabError(
                "a node fell exactly on a singular locus; adjust angular_n"
            )

    return QuadratureRule(
        domain=domain,
        nodes=nodes,
        weights=weights,
        levels=int(levels),
        resolution=(tuple(int(r) for r in radial_n), tuple(int(a) for a in angular_n)),
        singular_loci=loci,
        coord_edges=tuple(coord_edges),
    )


def build_shell_rule(
    domain,
    locus_coord,
    k_max,
    radial_n=12,
    angular_n=8,
    other_radial_n=16,
    other_angular_n=8,
    node_cap=DEFAULT_NODE_CAP,
):
    """Rule whose radial panels tile the dyadic shells of one coordinate.

    The shell coordinate gets one Gauss-Legendre panel per dyadic shell
    (2^-(k+1), 2^-k], k = 0..k_max; the region below 2^-(k_max+1) carries no
    nodes and is handled by the tail extrapolation of integrate_shells.
    Requires the coordinate radius to be 1 so the shells tile exactly.
    """
    n = domain.n
    if not (0 <= locus_coord < n):
        raise ConfigError("locus_coord out of range")
    if domain.radii[min(locus_coord, len(domain.radii) - 1)] != 1.0:
        raise ConfigError("shell rules require the shell coordinate radius to be 1")
    if domain.kind == "ball":
        raise ConfigError("shell rules are built on disc/polydisc domains")
    edges_shell = [0.5 ** k for k in range(k_max + 2)][::-1]

    radial = [other_radial_n] * n
    angular = [other_angular_n] * n
    radial[locus_coord] = radial_n
    angular[locus_coord] = angular_n

    coord_z, coord_w, coord_edges = [], [], []
    total = 1
    for j in range(n):
        if j == locus_coord:
            edges = edges_shell
        else:
            edges = [0.0, domain.radii[j]]
        count = (len(edges) - 1) * int(radial[j]) * int(angular[j])
        total *= count
        if total > node_cap:
            raise ResourceLimitError(
                f"rule would use more than node_cap={node_cap} nodes"
            )
        z, w = _coord_rule(domain.radii[j], radial[j], angular[j], edges)
        coord_z.append(z)
        coord_w.append(w)
        coord_edges.append(tuple(edges))

    if n == 1:
        nodes = coord_z[0][:, None]
        weights = coord_w[0].copy()
    else:
        n1 = coord_z[0].shape[0]
        n2 = coord_z[1].shape[0]
        nodes = np.empty((n1 * n2, 2), dtype=np.complex128)
        nodes[:, 0] = np.repeat(coord_z[0], n2)
        nodes[:, 1] = np.tile(coord_z[1], n1)
        weights = (coord_w[0][:, None] * coord_w[1][None, :]).ravel()

    locus = tuple(1.0 + 0j if j == locus_coord else 0j for j in range(n))
    return QuadratureRule(
        domain=domain,
        nodes=nodes,
        weights=weights,
        levels=k_max,
        resolution=(tuple(radial), tuple(angular)),
        singular_loci=(locus,),
        coord_edges=tuple(coord_edges),
    )


def eval_over_nodes(rule, integrand, workers=None):
    """Evaluate an integrand at all nodes: chunked, optionally threaded.

    Accepts a callable Z -> values or a precomputed value array.  Chunk
    results are concatenated in index order, so the output is independent of
    the worker count.
    """
    if isinstance(integrand, np.ndarray):
        if integrand.shape[0] != rule.node_count:
            raise ConfigError("value array does not match the rule's node count")
        return integrand
    N = rule.node_count
    chunks = [(i, min(i + EVAL_CHUNK, N)) for i in range(0, N, EVAL_CHUNK)]
    if len(chunks) == 1:
        return np.asarray(integrand(rule.nodes))
    w = _workers() if workers is None else max(1, int(workers))
    if w == 1:
        parts = [np.asarray(integrand(rule.nodes[a:b])) for a, b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=w) as ex:
            parts = list(ex.map(lambda ab: np.asarray(integrand(rule.nodes[ab[0]:ab[1]])), chunks))
    return np.concatenate(parts)


def weighted_sum(rule, values):
    """sum(w_i * values_i) with fixed-order compensated accumulation."""
    values = np.asarray(values)
    bad = ~np.isfinite(values) if not np.iscomplexobj(values) else (
        ~np.isfinite(values.real) | ~np.isfinite(values.imag)
    )
    if bad.any():
        idx = int(np.argmax(bad))
        raise NonFiniteIntegrandError(idx, values[idx])
    w = np.ascontiguousarray(rule.weights, dtype=np.float64)
    if np.iscomplexobj(values):
        return kernels.comp_dot_complex(w, np.ascontiguousarray(values, dtype=np.complex128))
    return kernels.comp_dot_real(w, np.ascontiguousarray(values, dtype=np.float64))


def integrate(rule, integrand, workers=None):
    """Integral of the integrand over the rule's domain.

    Returns a float for real-valued integrands, complex otherwise.  Raises
    NonFiniteIntegrandError if the integrand is inf/nan at any node.
    """
    values = eval_over_nodes(rule, integrand, workers=workers)
    return weighted_sum(rule, values)


@dataclass(frozen=True)
class IntegralOutcome:
    """Verdict of a dyadic-shell integrability test.

    kind is "finite", "divergent" or "undecided".  fitted_exponent is the
    mean of log2(I_k / I_{k+1}) over the fit window (positive means shell
    contributions decay toward the locus).  For a finite verdict, value is
    outer + sum of shells + geometric tail estimate.
    """

    kind: str
    value: object
    fitted_exponent: object
    shell_contributions: tuple
    outer: float
    tail: float

    @property
    def is_finite(self):
        return self.kind == "finite"

    @property
    def is_divergent(self):
        return self.kind == "divergent"


def integrate_shells(rule, integrand, locus, k_max, workers=None, fit_window=8):
    """Classify the integral by dyadic shell contributions around a locus.

    Shell k collects nodes with 2^-(k+1) < |l(z)| <= 2^-k.  The fitted slope
    s is the mean of log2(I_k / I_{k+1}) over the last `fit_window` positive
    consecutive pairs (late shells see the asymptotic regime).  Verdicts:
    s above the dead zone -> finite with a geometric tail estimate, s below
    -> divergent, near-zero slope with non-decaying shells -> divergent,
    anything else -> undecided.
    """
    if k_max < 3:
        raise ConfigError("k_max must be at least 3 for a slope fit")
    c = np.asarray(_locus_coeffs(locus, rule.domain.n), dtype=np.complex128)
    values = eval_over_nodes(rule, integrand, workers=workers)
    values = np.asarray(values, dtype=np.float64)
    lv = np.abs(rule.nodes @ c)
    with np.errstate(divide="ignore"):
        kk = np.floor(-np.log2(lv)).astype(np.int64)
    w = np.ascontiguousarray(rule.weights, dtype=np.float64)

    def bucket(mask):
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return 0.0
        return kernels.comp_dot_real(
            np.ascontiguousarray(w[idx]), np.ascontiguousarray(values[idx])
        )

    outer = bucket(kk < 0)
    shells = [bucket(kk == k) for k in range(k_max + 1)]

    pairs = [
        math.log2(shells[k] / shells[k + 1])
        for k in range(k_max)
        if shells[k] > 0.0 and shells[k + 1] > 0.0
    ]
    contributions = tuple((k, shells[k]) for k in range(k_max + 1))

    if all(s == 0.0 for s in shells):
        return IntegralOutcome("finite", outer, None, contributions, outer, 0.0)
    if len(pairs) < 3:
        return IntegralOutcome("undecided", None, None, contributions, outer, 0.0)

    window = pairs[-min(int(fit_window), len(pairs)):]
    slope = float(np.mean(window))

    if slope >= SLOPE_DEAD_ZONE - SLOPE_FUZZ:
        rho = 2.0 ** (-slope)
        tail = shells[-1] * rho / (1.0 - rho)
        value = outer + math.fsum(shells) + tail
        return IntegralOutcome("finite", value, slope, contributions, outer, tail)
    if slope <= -(SLOPE_DEAD_ZONE - SLOPE_FUZZ):
        return IntegralOutcome("divergent", None, slope, contributions, outer, 0.0)
    tail_shells = [shells[k] for k, _ in enumerate(shells) if shells[k] > 0.0][-len(window) - 1:]
    if min(tail_shells) >= NONDECAY_MIN_RATIO * max(tail_shells):
        return IntegralOutcome("divergent", None, slope, contributions, outer, 0.0)
    return IntegralOutcome("undecided", None, slope, contributions, outer, 0.0)
