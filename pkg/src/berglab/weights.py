"""Plurisubharmonic weight expressions and the cutoff construction.

Weights are expression trees over a closed atom algebra: a*ln|l(z)| for a
linear functional l and a >= 0, s*|z|^2, constants, nonnegative-coefficient
sums, pointwise max, truncation from below, and constant shifts.  Every
constructor preserves plurisubharmonicity.  Values live in [-inf, +inf);
log atoms evaluate to -inf exactly on their zero set.

The module also provides negativity certification, L1 distances between
weights, the truncation max(w, -j) and the (sharp or ramped) cutoff driven
by the overlap condition phi <= psi + eps, together with the derivative
density used by the constant-16 estimate check.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import BerglabError, ConfigError, DivergenceError
from .quadrature import integrate, integrate_shells

NEG_MARGIN = 1e-9


def _as_nodes(z, n):
    Z = np.asarray(z, dtype=np.complex128)
    if Z.ndim == 0:
        Z = Z.reshape(1, 1)
    elif Z.ndim == 1:
        # a single point given as a coordinate tuple, or a batch in C^1
        Z = Z.reshape(1, -1) if Z.shape[0] == n and n > 1 else Z.reshape(-1, 1)
    if Z.shape[1] != n:
        raise ConfigError(f"points have {Z.shape[1]} coordinates, weight expects {n}")
    return Z


@dataclass(frozen=True)
class WeightExpr:
    """Base class; nodes override _values."""

    def evaluate(self, Z):
        """Vectorized evaluation at an (N, n) array of points."""
        Z = _as_nodes(Z, self.arity)
        return self._values(Z)

    def __call__(self, Z):
        return self.evaluate(Z)

    @property
    def arity(self):
        raise NotImplementedError

    @property
    def certified_negative(self):
        return getattr(self, "negative", False)


@dataclass(frozen=True)
class LogAbsLinear(WeightExpr):
    """scale * ln|c1 z1 + ... + cn zn| with scale >= 0 (PSH)."""

    coeffs: tuple
    scale: float
    negative: bool = False

    def __post_init__(self):
        if self.scale < 0:
            raise ConfigError("log atom scale must be nonnegative")
        if all(c == 0 for c in self.coeffs):
            raise ConfigError("log atom needs a nonzero linear functional")

    @property
    def arity(self):
        return len(self.coeffs)

    def _values(self, Z):
        lv = np.abs(Z @ np.asarray(self.coeffs, dtype=np.complex128))
        with np.errstate(divide="ignore"):
            return self.scale * np.log(lv)


@dataclass(frozen=True)
class SquareNorm(WeightExpr):
    """scale * |z|^2 with scale >= 0."""

    scale: float
    dim: int = 1
    negative: bool = False

    def __post_init__(self):
        if self.scale < 0:
            raise ConfigError("square-norm scale must be nonnegative")

    @property
    def arity(self):
        return self.dim

    def _values(self, Z):
        return self.scale * (np.abs(Z) ** 2).sum(axis=1)


@dataclass(frozen=True)
class ConstWeight(WeightExpr):
    value: float
    dim: int = 1
    negative: bool = False

    @property
    def arity(self):
        return self.dim

    def _values(self, Z):
        return np.full(Z.shape[0], float(self.value))


@dataclass(frozen=True)
class WeightSum(WeightExpr):
    """Sum of children with nonnegative coefficients."""

    terms: tuple  # of (coef, WeightExpr)
    negative: bool = False

    def __post_init__(self):
        if not self.terms:
            raise ConfigError("empty sum")
        if any(c < 0 for c, _ in self.terms):
            raise ConfigError("sum coefficients must be nonnegative")
        arities = {w.arity for _, w in self.terms}
        if len(arities) != 1:
            raise ConfigError("sum children must share the ambient dimension")

    @property
    def arity(self):
        return self.terms[0][1].arity

    def _values(self, Z):
        out = np.zeros(Z.shape[0])
        for c, w in self.terms:
            out = out + c * w._values(Z)
        return out


@dataclass(frozen=True)
class WeightMax(WeightExpr):
    left: WeightExpr
    right: WeightExpr
    negative: bool = False

    def __post_init__(self):
        if self.left.arity != self.right.arity:
            raise ConfigError("max children must share the ambient dimension")

    @property
    def arity(self):
        return self.left.arity

    def _values(self, Z):
        return np.maximum(self.left._values(Z), self.right._values(Z))


@dataclass(frozen=True)
class TruncateBelow(WeightExpr):
    """max(child, floor); bounded below, pointwise >= child."""

    child: WeightExpr
    floor: float
    negative: bool = False

    @property
    def arity(self):
        return self.child.arity

    def _values(self, Z):
        return np.maximum(self.child._values(Z), float(self.floor))


@dataclass(frozen=True)
class ShiftWeight(WeightExpr):
    child: WeightExpr
    offset: float
    negative: bool = False

    @property
    def arity(self):
        return self.child.arity

    def _values(self, Z):
        return self.child._values(Z) + float(self.offset)


def eval_weight(w, z):
    """Value of the weight at a single point, in [-inf, +inf)."""
    return float(w.evaluate(z)[0])


# ---------------------------------------------------------------------------
# serialization (the config schema of the CLI)

def weight_to_config(w):
    if isinstance(w, LogAbsLinear):
        d = {
            "op": "logabs",
            "coeffs": [[c.real, c.imag] for c in map(complex, w.coeffs)],
            "scale": w.scale,
        }
    elif isinstance(w, SquareNorm):
        d = {"op": "sqnorm", "scale": w.scale, "dim": w.dim}
    elif isinstance(w, ConstWeight):
        d = {"op": "const", "value": w.value, "dim": w.dim}
    elif isinstance(w, WeightSum):
        d = {
            "op": "sum",
            "terms": [{"coef": c, "child": weight_to_config(x)} for c, x in w.terms],
        }
    elif isinstance(w, WeightMax):
        d = {"op": "max", "left": weight_to_config(w.left), "right": weight_to_config(w.right)}
    elif isinstance(w, TruncateBelow):
        d = {"op": "trunc", "child": weight_to_config(w.child), "floor": w.floor}
    elif isinstance(w, ShiftWeight):
        d = {"op": "shift", "child": weight_to_config(w.child), "offset": w.offset}
    else:
        raise ConfigError(f"cannot serialize weight node {type(w).__name__}")
    if w.certified_negative:
        d["negative"] = True
    return d


def weight_from_config(d):
    try:
        op = d["op"]
    except (TypeError, KeyError):
        raise ConfigError("weight config must be an object with an 'op' key")
    neg = bool(d.get("negative", False))
    if op == "logabs":
        w = LogAbsLinear(
            coeffs=tuple(complex(re, im) for re, im in d["coeffs"]),
            scale=float(d["scale"]),
            negative=neg,
        )
    elif op == "sqnorm":
        w = SquareNorm(scale=float(d["scale"]), dim=int(d.get("dim", 1)), negative=neg)
    elif op == "const":
        w = ConstWeight(value=float(d["value"]), dim=int(d.get("dim", 1)), negative=neg)
    elif op == "sum":
        w = WeightSum(
            terms=tuple(
                (float(t["coef"]), weight_from_config(t["child"])) for t in d["terms"]
            ),
            negative=neg,
        )
    elif op == "max":
        w = WeightMax(weight_from_config(d["left"]), weight_from_config(d["right"]), negative=neg)
    elif op == "trunc":
        w = TruncateBelow(weight_from_config(d["child"]), float(d["floor"]), negative=neg)
    elif op == "shift":
        w = ShiftWeight(weight_from_config(d["child"]), float(d["offset"]), negative=neg)
    else:
        raise ConfigError(f"unknown weight op {op!r}")
    return w


# ---------------------------------------------------------------------------
# structural analysis

def sup_bound(w, domain):
    """Analytic upper bound for sup of the weight over the domain.

    Exact for atoms, max, truncation and shift; subadditive (an upper bound)
    for sums.  Used to certify negativity without trusting a sample grid.
    """
    if isinstance(w, LogAbsLinear):
        c = np.asarray(w.coeffs, dtype=np.complex128)
        if domain.kind == "disc":
            m = abs(c[0]) * domain.radii[0]
        elif domain.kind == "polydisc":
            m = abs(c[0]) * domain.radii[0] + abs(c[1]) * domain.radii[1]
        else:  # ball
            m = float(np.linalg.norm(c)) * domain.radii[0]
        return w.scale * math.log(m) if m > 0 else -math.inf
    if isinstance(w, SquareNorm):
        if domain.kind == "polydisc":
            m2 = domain.radii[0] ** 2 + domain.radii[1] ** 2
        else:
            m2 = domain.radii[0] ** 2
        return w.scale * m2
    if isinstance(w, ConstWeight):
        return float(w.value)
    if isinstance(w, WeightSum):
        return math.fsum(c * sup_bound(x, domain) for c, x in w.terms)
    if isinstance(w, WeightMax):
        return max(sup_bound(w.left, domain), sup_bound(w.right, domain))
    if isinstance(w, TruncateBelow):
        return max(sup_bound(w.child, domain), float(w.floor))
    if isinstance(w, ShiftWeight):
        return sup_bound(w.child, domain) + float(w.offset)
    raise ConfigError(f"cannot bound weight node {type(w).__name__}")


def is_bounded_below(w):
    """True when the expression is bounded below on bounded domains."""
    if isinstance(w, (ConstWeight, SquareNorm, TruncateBelow)):
        return True
    if isinstance(w, LogAbsLinear):
        return w.scale == 0.0
    if isinstance(w, WeightSum):
        return all(c == 0.0 or is_bounded_below(x) for c, x in w.terms)
    if isinstance(w, WeightMax):
        return is_bounded_below(w.left) or is_bounded_below(w.right)
    if isinstance(w, ShiftWeight):
        return is_bounded_below(w.child)
    return False


def log_atom_loci(w):
    """Linear functionals of all log atoms with positive scale in the tree.

    Truncated subtrees are skipped: truncation removes the singularity.
    """
    if isinstance(w, LogAbsLinear):
        return [w.coeffs] if w.scale > 0 else []
    if isinstance(w, WeightSum):
        out = []
        for c, x in w.terms:
            if c > 0:
                out.extend(log_atom_loci(x))
        return out
    if isinstance(w, WeightMax):
        # max keeps a singularity only where both branches are singular
        left = log_atom_loci(w.left)
        right = log_atom_loci(w.right)
        return [l for l in left if l in right]
    if isinstance(w, ShiftWeight):
        return log_atom_loci(w.child)
    if isinstance(w, TruncateBelow):
        return []
    return []


# ---------------------------------------------------------------------------
# radial profiles (piecewise-linear in t = ln r) for weights in C^1

class RadialProfile:
    """Piecewise-linear profile v(t) = slope*t + intercept over t = ln r.

    Available for C^1 trees built from log atoms, constants, sums, max,
    truncation and shifts.  Segment boundaries are the radial kinks of the
    weight; slopes are nonnegative for weight trees (values nondecreasing in
    r) but arbitrary for differences of profiles.
    """

    def __init__(self, breakpoints, slopes, intercepts):
        # len(slopes) == len(breakpoints) + 1; segment i covers
        # (breakpoints[i-1], breakpoints[i]] in t.
        self.breakpoints = list(breakpoints)
        self.slopes = list(slopes)
        self.intercepts = list(intercepts)

    def segment_index(self, t):
        return int(np.searchsorted(self.breakpoints, t, side="left"))

    def value(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, t, side="left")
        sl = np.asarray(self.slopes)[idx]
        ic = np.asarray(self.intercepts)[idx]
        with np.errstate(invalid="ignore"):
            out = sl * t + ic
        # 0 * (-inf) at clamped segments: the value is the intercept
        out = np.where((sl == 0.0) & ~np.isfinite(t), ic, out)
        return out

    def slope_at(self, t):
        t = np.asarray(t, dtype=np.float64)
        idx = np.searchsorted(self.breakpoints, t, side="left")
        return np.asarray(self.slopes)[idx]

    def sub(self, other):
        return _combine_profiles(self, other, lambda a, b: a - b)

    def add(self, other):
        return _combine_profiles(self, other, lambda a, b: a + b)

    def scaled(self, c):
        return RadialProfile(
            self.breakpoints,
            [c * s for s in self.slopes],
            [c * i for i in self.intercepts],
        )

    def shifted(self, off):
        return RadialProfile(self.breakpoints, self.slopes, [i + off for i in self.intercepts])

    def maximum(self, other):
        merged = _merge_breaks(self, other)
        return _piecewise_select(merged, self, other, take_max=True)

    def solve(self, level):
        """All t where the profile equals `level` (nonflat segments only)."""
        bps = [-math.inf] + self.breakpoints + [math.inf]
        roots = []
        for i, (sl, ic) in enumerate(zip(self.slopes, self.intercepts)):
            if sl == 0.0:
                continue
            t = (level - ic) / sl
            if bps[i] < t <= bps[i + 1]:
                roots.append(t)
        return roots


def _merge_breaks(p, q):
    out = sorted(set(p.breakpoints) | set(q.breakpoints))
    return out


def _segments_on(breaks):
    bps = [-math.inf] + breaks + [math.inf]
    return list(zip(bps[:-1], bps[1:]))


def _eval_seg(p, t_lo, t_hi):
    # representative point strictly inside the segment
    if not math.isfinite(t_lo):
        t = t_hi - 1.0 if math.isfinite(t_hi) else 0.0
    elif not math.isfinite(t_hi):
        t = t_lo + 1.0
    else:
        t = 0.5 * (t_lo + t_hi)
    i = p.segment_index(t)
    return p.slopes[i], p.intercepts[i]


def _combine_profiles(p, q, op):
    breaks = _merge_breaks(p, q)
    slopes, intercepts = [], []
    for t_lo, t_hi in _segments_on(breaks):
        sp, ip = _eval_seg(p, t_lo, t_hi)
        sq, iq = _eval_seg(q, t_lo, t_hi)
        slopes.append(op(sp, sq))
        intercepts.append(op(ip, iq))
    return RadialProfile(breaks, slopes, intercepts)


def _piecewise_select(breaks, p, q, take_max):
    # refine the merged grid with crossing points, then pick per segment
    crossings = []
    for t_lo, t_hi in _segments_on(breaks):
        sp, ip = _eval_seg(p, t_lo, t_hi)
        sq, iq = _eval_seg(q, t_lo, t_hi)
        if sp != sq:
            t = (iq - ip) / (sp - sq)
            if t_lo < t < t_hi:
                crossings.append(t)
    breaks = sorted(set(breaks) | set(crossings))
    slopes, intercepts = [], []
    for t_lo, t_hi in _segments_on(breaks):
        sp, ip = _eval_seg(p, t_lo, t_hi)
        sq, iq = _eval_seg(q, t_lo, t_hi)
        t_mid = _midpoint(t_lo, t_hi)
        vp = sp * t_mid + ip
        vq = sq * t_mid + iq
        pick_p = (vp >= vq) if take_max else (vp <= vq)
        slopes.append(sp if pick_p else sq)
        intercepts.append(ip if pick_p else iq)
    return RadialProfile(breaks, slopes, intercepts)


def _midpoint(t_lo, t_hi):
    if not math.isfinite(t_lo):
        return t_hi - 1.0 if math.isfinite(t_hi) else 0.0
    if not math.isfinite(t_hi):
        return t_lo + 1.0
    return 0.5 * (t_lo + t_hi)


def radial_profile(w):
    """RadialProfile of a C^1 weight, or None when not piecewise-log-linear."""
    if w.arity != 1:
        return None
    if isinstance(w, LogAbsLinear):
        c = abs(complex(w.coeffs[0]))
        return RadialProfile([], [w.scale], [w.scale * math.log(c)])
    if isinstance(w, ConstWeight):
        return RadialProfile([], [0.0], [float(w.value)])
    if isinstance(w, WeightSum):
        out = None
        for c, x in w.terms:
            px = radial_profile(x)
            if px is None:
                return None
            px = px.scaled(c)
            out = px if out is None else out.add(px)
        return out
    if isinstance(w, WeightMax):
        pl = radial_profile(w.left)
        pr = radial_profile(w.right)
        if pl is None or pr is None:
            return None
        return pl.maximum(pr)
    if isinstance(w, TruncateBelow):
        pc = radial_profile(w.child)
        if pc is None:
            return None
        return pc.maximum(RadialProfile([], [0.0], [float(w.floor)]))
    if isinstance(w, ShiftWeight):
        pc = radial_profile(w.child)
        return None if pc is None else pc.shifted(float(w.offset))
    return None


def radial_kink_radii(w, radius):
    """Radii in (0, radius) where the weight has a radial kink (C^1 only)."""
    p = radial_profile(w)
    if p is None:
        return []
    out = []
    for t in p.breakpoints:
        r = math.exp(t)
        if 0.0 < r < radius:
            out.append(r)
    return sorted(set(out))


# ---------------------------------------------------------------------------
# operations

def enforce_negative(w, domain, sample_n=64, margin=NEG_MARGIN):
    """Certify the weight negative on the domain, shifting if needed.

    The supremum is controlled by the analytic bound sup_bound (exact for
    atoms, conservative for sums), so the certificate holds on arbitrarily
    dense check grids, not only on the sample grid.  A weight whose sup
    exceeds -margin is shifted down to make sup <= -margin; the sampled sup
    on a (sample_n x sample_n per coordinate) grid is computed as a
    diagnostic cross-check.
    """
    if w.arity != domain.n:
        raise ConfigError("weight dimension does not match the domain")
    s = sup_bound(w, domain)
    if not s < math.inf:
        raise BerglabError("weight has unbounded supremum on the domain")
    grid = _sample_grid(domain, sample_n)
    sampled = float(np.max(w.evaluate(grid)))
    if sampled > s + 1e-12 * max(1.0, abs(s)):
        raise BerglabError("analytic sup bound inconsistent with sampled values")
    if s <= -margin:
        return replace(w, negative=True)
    return ShiftWeight(child=w, offset=-(s + margin), negative=True)


def _sample_grid(domain, sample_n):
    m = int(sample_n)
    rs = np.linspace(0.0, 1.0, m) ** 0.5  # denser near the boundary in area
    th = np.arange(m) * (2.0 * math.pi / m)
    pts1 = (rs[:, None] * np.exp(1j * th)[None, :]).ravel()
    if domain.n == 1:
        return (domain.radii[0] * pts1)[:, None]
    # product grid would square the count; pair two decorrelated copies
    pts2 = (rs[:, None] * np.exp(1j * (th + math.pi / (2 * m)))[None, :]).ravel()
    a = np.repeat(domain.radii[0] * pts1, 8)
    b = np.tile(domain.radii[1] * pts2[:: max(1, len(pts2) // 8)][:8], len(pts1))
    return np.stack([a, b[: len(a)]], axis=1)


def l1_distance(phi, psi, rule):
    """integral of |phi - psi| over the rule's domain (a pseudometric)."""
    dv = np.abs(phi.evaluate(rule.nodes) - psi.evaluate(rule.nodes))
    if not np.isfinite(dv).all():
        raise DivergenceError("weight difference is not finite at a node")
    val = integrate(rule, dv)
    if not math.isfinite(val):
        raise DivergenceError("L1 distance did not evaluate to a finite number")
    return float(val)


def truncate(w, j):
    """max(w, -j): the bounded-from-below truncation at level j > 0."""
    if j <= 0:
        raise ConfigError("truncation level must be positive")
    return TruncateBelow(child=w, floor=-float(j))


@dataclass(frozen=True)
class CutoffSpec:
    """Cutoff driven by phi <= psi + epsilon; smoothing = 0 means sharp."""

    phi: WeightExpr
    psi: WeightExpr
    epsilon: float
    smoothing: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.smoothing < 0:
            raise ConfigError("smoothing must be nonnegative")
        if self.smoothing > 0 and not self.smoothing < self.epsilon:
            raise ConfigError("smoothing must be smaller than epsilon")


def cutoff_values(spec, Z):
    """Cutoff in [0, 1] at the given points.

    Sharp (smoothing 0): indicator of {phi <= psi + eps}.  Smoothed: the ramp
    clamp((psi + eps - phi)/s, 0, 1), equal to 1 on {phi <= psi + eps - s}
    and 0 on {phi > psi + eps}.  -inf values follow the limit conventions:
    both weights -inf gives 1, psi alone -inf gives 0, phi alone -inf gives 1.
    """
    phi_v = spec.phi.evaluate(Z)
    psi_v = spec.psi.evaluate(Z)
    if spec.smoothing == 0.0:
        return (phi_v <= psi_v + spec.epsilon).astype(np.float64)
    both = np.isneginf(phi_v) & np.isneginf(psi_v)
    with np.errstate(invalid="ignore"):
        u = (psi_v + spec.epsilon - phi_v) / spec.smoothing
    out = np.clip(u, 0.0, 1.0)
    out = np.where(both, 1.0, out)
    return out


def cutoff(spec, z):
    """Scalar cutoff value at one point."""
    return float(cutoff_values(spec, _as_nodes(z, spec.phi.arity))[0])


def ramp_band_radii(spec):
    """Outermost ramp band (r_inner, r_outer) of a smoothed radial cutoff.

    The band is the radial interval where phi - psi crosses from epsilon
    (inner edge, cutoff 0) down to epsilon - smoothing (outer edge, cutoff
    1), taking the outermost crossings.  Returns None when phi - psi never
    reaches epsilon (the cutoff is 1 everywhere).  Raises when psi has a
    kink or a flat (clamped) stretch inside the band, because the cutoff is
    then not a function of t = log(-psi) there.
    """
    if spec.smoothing <= 0:
        raise ConfigError("ramp band requires a smoothed cutoff")
    p_phi = radial_profile(spec.phi)
    p_psi = radial_profile(spec.psi)
    if p_phi is None or p_psi is None:
        raise ConfigError("ramp band requires radial C^1 weights")
    diff = p_phi.sub(p_psi)
    t_in = diff.solve(spec.epsilon)
    if not t_in:
        return None
    t_out = diff.solve(spec.epsilon - spec.smoothing)
    if not t_out:
        raise BerglabError("ramp band has no outer edge inside the domain")
    t_lo, t_hi = max(t_in), max(t_out)
    if not t_lo < t_hi:
        raise BerglabError("ramp band is inverted; phi - psi must fall outward")
    for b in p_psi.breakpoints:
        if t_lo <= b <= t_hi:
            raise BerglabError(
                "psi has a kink inside the ramp band; t = log(-psi) is not "
                "smooth there (shrink epsilon or the smoothing)"
            )
    if p_psi.slope_at(0.5 * (t_lo + t_hi)) == 0.0:
        raise BerglabError(
            "psi is locally constant on the ramp band; t = log(-psi) is not "
            "invertible there"
        )
    return math.exp(t_lo), math.exp(t_hi)


def tramp_cutoff_values(spec, Z):
    """Cutoff as a genuine function of t = log(-psi): no inner re-opening.

    Equals the smoothed ramp on and outside the outermost band and is
    extended by 0 inward of it.  For truncated weights the plain ramp in
    phi - psi re-opens to 1 deep inside (where both weights are clamped);
    that re-opened part is not a function of t, so the constant-16 check
    uses this variant.
    """
    band = ramp_band_radii(spec)
    vals = cutoff_values(spec, Z)
    if band is None:
        return vals
    Z = _as_nodes(Z, spec.phi.arity)
    r = np.abs(Z[:, 0])
    return np.where(r > band[0], vals, 0.0)


def cutoff_derivative_density(spec, f, Z):
    """H = |f|^2 |chi'(t)|^2 with chi reparameterized over t = log(-psi).

    chi is the smoothed cutoff as a function of t (tramp_cutoff_values); on
    the ramp band its radial derivative converts into a t derivative by the
    chain rule, which requires psi strictly negative with a nonzero radial
    slope across the band.  Outside the band H = 0.
    """
    if spec.smoothing <= 0:
        raise ConfigError("derivative density requires a smoothed cutoff")
    Z = _as_nodes(Z, spec.phi.arity)
    psi_v = spec.psi.evaluate(Z)
    if np.any(psi_v >= 0):
        raise BerglabError("psi must be strictly negative for t = log(-psi)")
    H = np.zeros(Z.shape[0])
    band_radii = ramp_band_radii(spec)
    if band_radii is None:
        return H
    r = np.abs(Z[:, 0])
    band = (r > band_radii[0]) & (r < band_radii[1])
    if not band.any():
        return H
    p_phi = radial_profile(spec.phi)
    p_psi = radial_profile(spec.psi)
    t_r = np.log(r[band])
    s_phi = p_phi.slope_at(t_r)
    s_psi = p_psi.slope_at(t_r)
    # chi(r) = (psi + eps - phi)/s, d chi/dt = (dchi/d ln r) / (d t/d ln r)
    chi_prime_t = ((s_psi - s_phi) / spec.smoothing) * (psi_v[band] / s_psi)
    from .projection import eval_poly_values  # local import, no cycle at call time

    fv = eval_poly_values(f, Z[band])
    H[band] = (np.abs(fv) ** 2) * (chi_prime_t ** 2)
    return H
