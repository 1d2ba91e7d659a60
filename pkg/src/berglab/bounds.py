"""Construction of the approximating holomorphic g and its quantitative checks.

Given negative weights phi, psi that are close in L1 and a holomorphic
polynomial f with finite mass against e^-phi, the construction projects the
cutoff of f (supported where phi <= psi + eps) onto the holomorphic
polynomials in the psi-weighted space.  The minimal correction u = g - chi*f
is orthogonal to the holomorphic subspace by construction, and the report
records both sides of every inequality the construction is supposed to
satisfy: the e^eps mass bound, the two L2 distance bounds, and the
unweighted mass comparison.

Also here: the truncation ladder (bounded approximations max(w, -j) with a
coefficient-Cauchy diagnostic), the closeness sweep showing the distance
decay, and the a-posteriori check of the constant-16 estimate for the
minimal dbar correction under the measure (-psi) dV.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import BerglabError, ConfigError, DivergenceError
from .projection import (
    HoloPoly,
    WeightedSpace,
    eval_poly_values,
    gram_matrix,
    graded_monomials,
    orthonormalize,
    project,
    weighted_norm,
)
from .quadrature import build_domain, build_quadrature, integrate, integrate_shells, weighted_sum
from .weights import (
    CutoffSpec,
    WeightSum,
    cutoff_derivative_density,
    cutoff_values,
    tramp_cutoff_values,
    is_bounded_below,
    l1_distance,
    log_atom_loci,
    radial_kink_radii,
    radial_profile,
    truncate,
)

DEFAULT_SMOOTH_SLACK = 1e-6
DEFAULT_INDICATOR_SLACK = 2e-2


@dataclass(frozen=True)
class TheoremConfig:
    """One construction run: domain, weight pair, input f, cutoff parameters."""

    domain: object
    phi: object
    psi: object
    f: HoloPoly
    degree: int
    epsilon: float = None  # None: epsilon_factor * ||psi - phi||_L1
    epsilon_factor: float = 1.1
    smoothing: float = 0.0
    radial_n: int = 16
    angular_n: int = None  # None: max(32, 2*degree + 4)
    levels: int = 20
    radial_panels: int = 1
    node_cap: int = 2 ** 24
    smooth_slack: float = DEFAULT_SMOOTH_SLACK
    indicator_slack: float = DEFAULT_INDICATOR_SLACK

    @property
    def slack(self):
        return self.smooth_slack if self.smoothing > 0 else self.indicator_slack


@dataclass(frozen=True)
class TheoremReport:
    """All scalars and verdicts of one construction run."""

    M: float
    l1: float
    epsilon: float
    hypothesis_ok: bool
    norm_g_psi_sq: float
    bound_eM: float
    delta: float
    delta_sq: float
    bound_eps: float
    bound_C: float
    c_prime: float
    verdict_eM: bool
    verdict_eps: bool
    verdict_C: bool
    five_lhs: float
    five_rhs: float
    verdict_five: bool
    ortho_residual: float
    chi_f_norm: float
    u_norm: float
    g: HoloPoly
    degree: int
    smoothing: float
    slack: float
    nodes: int

    @property
    def all_bounds_ok(self):
        return self.verdict_eM and self.verdict_eps and self.verdict_C

    def to_dict(self):
        d = {
            "M": self.M,
            "l1": self.l1,
            "eps": self.epsilon,
            "hypothesis_ok": self.hypothesis_ok,
            "norm_g_sq": self.norm_g_psi_sq,
            "bound_eM": self.bound_eM,
            "delta": self.delta,
            "delta_sq": self.delta_sq,
            "bound_eps": self.bound_eps,
            "bound_C": self.bound_C,
            "c_prime": self.c_prime,
            "verdict_eM": self.verdict_eM,
            "verdict_eps": self.verdict_eps,
            "verdict_C": self.verdict_C,
            "five_lhs": self.five_lhs,
            "five_rhs": self.five_rhs,
            "verdict_five": self.verdict_five,
            "ortho_residual": self.ortho_residual,
            "chi_f_norm": self.chi_f_norm,
            "u_norm": self.u_norm,
            "g": self.g.to_config(),
            "d": self.degree,
            "smoothing": self.smoothing,
            "slack": self.slack,
            "nodes": self.nodes,
        }
        return d


def _cutoff_edge_radii(phi, psi, epsilon, smoothing, radius):
    """Radii where the cutoff changes regime, for radial weight pairs."""
    p_phi = radial_profile(phi)
    p_psi = radial_profile(psi)
    if p_phi is None or p_psi is None:
        return []
    diff = p_phi.sub(p_psi)
    levels = [epsilon]
    if smoothing > 0:
        levels.append(epsilon - smoothing)
    out = []
    for lv in levels:
        for t in diff.solve(lv):
            r = math.exp(t)
            if 0.0 < r < radius:
                out.append(r)
    return out


def pair_rule(cfg, epsilon=None, resolution_factor=1):
    """Quadrature rule adapted to a weight pair.

    Panel edges are forced at the radial kinks of both weights and, when the
    cutoff level is known, at the cutoff regime edges, so that the piecewise
    structure of the integrands is resolved panel by panel.
    """
    angular = cfg.angular_n or max(32, 2 * cfg.degree + 4)
    breaks = []
    if cfg.domain.n == 1:
        R = cfg.domain.radii[0]
        breaks = radial_kink_radii(cfg.phi, R) + radial_kink_radii(cfg.psi, R)
        if epsilon is not None:
            breaks += _cutoff_edge_radii(cfg.phi, cfg.psi, epsilon, cfg.smoothing, R)
        breaks = sorted(set(breaks))
    loci = [tuple(l) for l in log_atom_loci(cfg.phi) + log_atom_loci(cfg.psi)]
    seen = []
    for l in loci:
        if l not in seen:
            seen.append(l)
    return build_quadrature(
        cfg.domain,
        radial_n=cfg.radial_n * resolution_factor,
        angular_n=angular * resolution_factor,
        levels=cfg.levels,
        singular_loci=seen,
        radial_panels=cfg.radial_panels,
        radial_breakpoints=(tuple(breaks),) if cfg.domain.n == 1 else None,
        node_cap=cfg.node_cap,
    )


def weighted_mass(f, phi, rule, k_max=12):
    """integral of e^-phi |f|^2 dV, with an integrability pre-check.

    When phi carries live log singularities the dyadic-shell classifier runs
    first; a divergent verdict raises (f has no finite mass against e^-phi).
    """
    fv = eval_poly_values(f, rule.nodes)
    phi_v = phi.evaluate(rule.nodes)
    vals = np.exp(-phi_v) * np.abs(fv) ** 2
    loci = log_atom_loci(phi)
    if loci:
        outcome = integrate_shells(rule, vals, loci[0], k_max=k_max)
        if not outcome.is_finite:
            raise DivergenceError(
                "f has no finite weighted mass against exp(-phi)", outcome
            )
        # the shell value carries the geometric tail below the finest shell,
        # where a shell-aligned rule places no nodes
        direct = float(integrate(rule, vals))
        return max(direct, float(outcome.value))
    return float(integrate(rule, vals))


def compact_sup_sq(f, domain, shrink=0.9, grid_n=64):
    """max of |f|^2 over a polar sample grid of the shrunken domain."""
    m = int(grid_n)
    th = np.arange(m) * (2.0 * math.pi / m)
    phase = np.exp(1j * th)
    best = 0.0
    if domain.n == 1:
        r = np.linspace(0.0, shrink * domain.radii[0], m)
        Z = (r[:, None] * phase[None, :]).reshape(-1, 1)
        best = float(np.max(np.abs(eval_poly_values(f, Z)) ** 2))
    else:
        mm = max(8, m // 4)
        th2 = np.arange(mm) * (2.0 * math.pi / mm)
        for j_r1 in np.linspace(0.0, shrink * domain.radii[0], mm):
            z1 = j_r1 * np.exp(1j * th2)
            for j_r2 in np.linspace(0.0, shrink * domain.radii[1], mm):
                z2 = j_r2 * np.exp(1j * th2)
                Z = np.stack(
                    [np.repeat(z1, mm), np.tile(z2, mm)], axis=1
                )
                best = max(best, float(np.max(np.abs(eval_poly_values(f, Z)) ** 2)))
    return best


def run_theorem_pair(cfg):
    """Construct g for a bounded weight pair and check every inequality.

    Requires both weights certified negative and bounded below (truncate
    first for singular weights).  A failed closeness hypothesis
    (l1 >= epsilon) is recorded in the report, not raised; the bounds are
    still computed.
    """
    if not (cfg.phi.certified_negative and cfg.psi.certified_negative):
        raise ConfigError("both weights must be certified negative (enforce_negative)")
    if not (is_bounded_below(cfg.phi) and is_bounded_below(cfg.psi)):
        raise ConfigError(
            "bounded-pair run requires weights bounded below; truncate them first"
        )
    if cfg.f.degree > cfg.degree:
        raise ConfigError("degree must be at least deg f")

    rule = pair_rule(cfg)
    l1 = l1_distance(cfg.phi, cfg.psi, rule)
    epsilon = cfg.epsilon if cfg.epsilon is not None else max(cfg.epsilon_factor * l1, 1e-9)
    # rebuild with the cutoff edges resolved now that epsilon is known
    rule = pair_rule(cfg, epsilon=epsilon)

    M = weighted_mass(cfg.f, cfg.phi, rule)
    hypothesis_ok = bool(l1 < epsilon)

    spec = CutoffSpec(phi=cfg.phi, psi=cfg.psi, epsilon=epsilon, smoothing=cfg.smoothing)
    chi = cutoff_values(spec, rule.nodes)
    fv = eval_poly_values(cfg.f, rule.nodes)
    hv = chi * fv

    space = WeightedSpace.from_weight(cfg.domain, cfg.psi, rule)
    fac = orthonormalize(gram_matrix(space, cfg.degree), graded_monomials(cfg.domain.n, cfg.degree))
    proj = project(space, fac, hv)
    gv = eval_poly_values(proj.poly, rule.nodes)
    uv = gv - hv

    norm_g_psi_sq = space.norm_sq(gv)
    bound_eM = math.exp(epsilon) * M

    delta_sq = float(weighted_sum(rule, np.abs(gv - fv) ** 2))
    delta = math.sqrt(max(delta_sq, 0.0))
    phi_v = cfg.phi.evaluate(rule.nodes)
    psi_v = cfg.psi.evaluate(rule.nodes)
    bound_eps = float(weighted_sum(rule, np.abs(psi_v - phi_v) * np.abs(fv) ** 2)) / epsilon
    c_prime = compact_sup_sq(cfg.f, cfg.domain)
    bound_C = c_prime * l1

    five_lhs = float(weighted_sum(rule, np.abs(gv) ** 2))
    five_rhs = float(weighted_sum(rule, (chi * np.abs(fv)) ** 2))

    slack = cfg.slack
    # absolute roundoff guard: with psi = phi the distance bounds are exactly
    # zero while delta carries ~1e-16 arithmetic noise
    tiny = 1e-12 * max(1.0, M)
    return TheoremReport(
        M=M,
        l1=l1,
        epsilon=epsilon,
        hypothesis_ok=hypothesis_ok,
        norm_g_psi_sq=norm_g_psi_sq,
        bound_eM=bound_eM,
        delta=delta,
        delta_sq=delta_sq,
        bound_eps=bound_eps,
        bound_C=bound_C,
        c_prime=c_prime,
        verdict_eM=bool(norm_g_psi_sq <= bound_eM * (1 + slack) + tiny),
        verdict_eps=bool(delta_sq <= bound_eps * (1 + slack) + tiny),
        verdict_C=bool(delta_sq <= bound_C * (1 + slack) + tiny),
        five_lhs=five_lhs,
        five_rhs=five_rhs,
        verdict_five=bool(five_lhs <= five_rhs * (1 + slack) + tiny),
        ortho_residual=proj.orthogonality_residual,
        chi_f_norm=proj.input_norm,
        u_norm=space.norm(uv),
        g=proj.poly,
        degree=cfg.degree,
        smoothing=cfg.smoothing,
        slack=slack,
        nodes=rule.node_count,
    )


def unweighted_pairing_identity(cfg):
    """Check <g0, f> = <chi f, f> for the unweighted projection g0 of chi f.

    This is the pairing identity the bounded-weight argument uses; it is
    exact for the projection taken in the unweighted space, so it is tested
    there.  Returns (lhs, rhs, f_mass).
    """
    rule = pair_rule(cfg, epsilon=cfg.epsilon)
    spec = CutoffSpec(phi=cfg.phi, psi=cfg.psi, epsilon=cfg.epsilon, smoothing=cfg.smoothing)
    chi = cutoff_values(spec, rule.nodes)
    fv = eval_poly_values(cfg.f, rule.nodes)
    space0 = WeightedSpace(cfg.domain, rule, np.ones(rule.node_count))
    fac0 = orthonormalize(
        gram_matrix(space0, cfg.degree), graded_monomials(cfg.domain.n, cfg.degree)
    )
    proj0 = project(space0, fac0, chi * fv)
    g0 = eval_poly_values(proj0.poly, rule.nodes)
    lhs = space0.inner(g0, fv)
    rhs = space0.inner(chi * fv, fv)
    f_mass = space0.norm_sq(fv)
    return lhs, rhs, f_mass


@dataclass(frozen=True)
class TruncationRow:
    j: float
    l1_j: float
    epsilon: float
    norm_g_psi_sq: float
    bound_eM: float
    verdict_eM: bool
    contraction_ok: bool
    coeff_cauchy: float  # ||g_j - g_prev|| in coefficients; nan on first row
    report: TheoremReport


@dataclass(frozen=True)
class TruncationReport:
    M: float
    l1_full: float
    epsilon: float
    rows: tuple
    monotone_ok: bool  # e^-psi_j nondecreasing in j at sample points

    @property
    def all_rows_ok(self):
        return all(r.verdict_eM and r.contraction_ok for r in self.rows)

    def to_dict(self):
        return {
            "M": self.M,
            "l1_full": self.l1_full,
            "eps": self.epsilon,
            "monotone_ok": self.monotone_ok,
            "rows": [
                {
                    "j": r.j,
                    "l1_j": r.l1_j,
                    "norm_g_sq": r.norm_g_psi_sq,
                    "bound_eM": r.bound_eM,
                    "verdict_eM": r.verdict_eM,
                    "contraction_ok": r.contraction_ok,
                    "coeff_cauchy": r.coeff_cauchy,
                    "delta": r.report.delta,
                    "nodes": r.report.nodes,
                }
                for r in self.rows
            ],
        }


def run_truncation(cfg, j_list, sample_points=1000, seed=7):
    """Bounded-pair runs on the truncated ladder (max(phi,-j), max(psi,-j)).

    Verifies per row the uniform e^eps M bound against the untruncated mass
    M, the L1 contraction transfer, and records the coefficient Cauchy
    distances between consecutive g_j (compactness surrogate).  The
    monotonicity of e^-psi_j in j is checked at random sample points.
    """
    j_list = list(j_list)
    if len(j_list) < 3 or any(b <= a for a, b in zip(j_list, j_list[1:])):
        raise ConfigError("j_list must be increasing with at least 3 entries")

    full_rule = pair_rule(cfg)
    M = weighted_mass(cfg.f, cfg.phi, full_rule)
    l1_full = l1_distance(cfg.phi, cfg.psi, full_rule)
    epsilon = cfg.epsilon if cfg.epsilon is not None else max(cfg.epsilon_factor * l1_full, 1e-9)

    rng = np.random.default_rng(seed)
    R = cfg.domain.radii[0]
    pts = (rng.uniform(0.0, R, size=sample_points) ** 0.5) * np.exp(
        1j * rng.uniform(0.0, 2 * math.pi, size=sample_points)
    )
    pts = pts[:, None] if cfg.domain.n == 1 else np.stack([pts, pts[::-1]], axis=1)

    rows = []
    prev_g = None
    prev_density = None
    monotone_ok = True
    for j in j_list:
        phi_j = truncate(cfg.phi, j)
        psi_j = truncate(cfg.psi, j)
        phi_j = replace(phi_j, negative=cfg.phi.certified_negative)
        psi_j = replace(psi_j, negative=cfg.psi.certified_negative)
        cfg_j = replace(cfg, phi=phi_j, psi=psi_j, epsilon=epsilon)
        rep = run_theorem_pair(cfg_j)
        contraction_ok = bool(rep.l1 <= l1_full * (1 + 1e-10) + 1e-12)
        coeff_cauchy = float("nan")
        if prev_g is not None:
            coeff_cauchy = (rep.g - prev_g).coeff_norm()
        density = np.exp(-psi_j.evaluate(pts))
        if prev_density is not None and np.any(density < prev_density):
            monotone_ok = False
        prev_density = density
        prev_g = rep.g
        rows.append(
            TruncationRow(
                j=float(j),
                l1_j=rep.l1,
                epsilon=epsilon,
                norm_g_psi_sq=rep.norm_g_psi_sq,
                bound_eM=math.exp(epsilon) * M,
                verdict_eM=bool(
                    rep.norm_g_psi_sq <= math.exp(epsilon) * M * (1 + cfg.slack)
                ),
                contraction_ok=contraction_ok,
                coeff_cauchy=coeff_cauchy,
                report=rep,
            )
        )
    return TruncationReport(
        M=M, l1_full=l1_full, epsilon=epsilon, rows=tuple(rows), monotone_ok=monotone_ok
    )


@dataclass(frozen=True)
class SweepRow:
    eta: float
    epsilon: float
    l1: float
    delta: float
    bound_C: float
    row_ok: bool  # delta^2 <= bound_C * (1 + slack)
    report: TheoremReport


@dataclass(frozen=True)
class SweepReport:
    rows: tuple  # sorted by epsilon descending
    floor: float  # measured quadrature error floor (eta = 0 run)
    floor_delta: float
    epsilon_rule: str

    @property
    def nonincreasing_ok(self):
        tiny = 10.0 * self.floor
        return all(
            b.delta <= a.delta * 1.05 + tiny for a, b in zip(self.rows, self.rows[1:])
        )

    @property
    def final_delta_ok(self):
        return self.rows[-1].delta <= 10.0 * self.floor

    @property
    def row_bounds_ok(self):
        return all(r.row_ok for r in self.rows)

    def to_dict(self):
        return {
            "epsilon_rule": self.epsilon_rule,
            "floor": self.floor,
            "floor_delta": self.floor_delta,
            "nonincreasing_ok": self.nonincreasing_ok,
            "final_delta_ok": self.final_delta_ok,
            "row_bounds_ok": self.row_bounds_ok,
            "rows": [
                {
                    "eta": r.eta,
                    "eps": r.epsilon,
                    "l1": r.l1,
                    "delta": r.delta,
                    "bound_C": r.bound_C,
                    "row_ok": r.row_ok,
                }
                for r in self.rows
            ],
        }


def run_sweep(cfg, atom, eta_list, epsilon_rule="proportional"):
    """Distance decay along the family psi_eta = phi + eta * atom.

    atom must be a negative expression bounded below (a truncated log atom).
    epsilon_rule "proportional" sets eps = epsilon_factor * l1 (the cutoff
    geometry is then scale-invariant in eta and delta stalls at the fixed-set
    projection defect); "sqrt" sets eps = sqrt(l1), whose cutoff set shrinks
    as eta -> 0 so the measured delta decays to the quadrature floor.  The
    floor is measured from the eta = 0 run, guarded below by machine scale.
    """
    if epsilon_rule not in ("proportional", "sqrt"):
        raise ConfigError("epsilon_rule must be 'proportional' or 'sqrt'")
    if not is_bounded_below(atom):
        raise ConfigError("sweep atom must be bounded below (truncate the log atom)")

    def make_cfg(eta):
        if eta == 0.0:
            psi = cfg.phi
        else:
            # phi <= 0 and atom <= 0, so the sum is negative by construction
            psi = replace(
                WeightSum(terms=((1.0, cfg.phi), (float(eta), atom))), negative=True
            )
        return replace(cfg, psi=psi, epsilon=None)

    def eps_for(l1):
        if epsilon_rule == "proportional":
            return max(cfg.epsilon_factor * l1, 1e-9)
        return max(math.sqrt(l1), 1e-9)

    rows = []
    for eta in sorted(set(float(e) for e in eta_list), reverse=True):
        c = make_cfg(eta)
        probe_rule = pair_rule(c)
        l1 = l1_distance(c.phi, c.psi, probe_rule)
        c = replace(c, epsilon=eps_for(l1))
        rep = run_theorem_pair(c)
        rows.append(
            SweepRow(
                eta=eta,
                epsilon=rep.epsilon,
                l1=rep.l1,
                delta=rep.delta,
                bound_C=rep.bound_C,
                row_ok=bool(rep.delta_sq <= rep.bound_C * (1 + cfg.slack)),
                report=rep,
            )
        )
    zero = run_theorem_pair(replace(make_cfg(0.0), epsilon=1e-9))
    base_rule = pair_rule(cfg)
    f_scale = math.sqrt(
        float(weighted_sum(base_rule, np.abs(eval_poly_values(cfg.f, base_rule.nodes)) ** 2))
    )
    floor = max(zero.delta, 1e-12 * max(f_scale, 1.0))
    return SweepReport(
        rows=tuple(rows), floor=floor, floor_delta=zero.delta, epsilon_rule=epsilon_rule
    )


@dataclass(frozen=True)
class BlockiResult:
    lhs: float  # ||u||^2 under the measure (-psi) dV
    rhs: float  # 16 * integral of H (-psi) dV
    ratio: float
    verdict: bool
    band_nodes: int

    def to_dict(self):
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "ratio": self.ratio,
            "verdict": self.verdict,
            "band_nodes": self.band_nodes,
        }


def blocki_check(cfg):
    """A-posteriori check of the constant-16 estimate for the correction u.

    Uses the substitution weight w = -log(-psi), whose associated measure is
    e^-w dV = (-psi) dV.  The cutoff is the smoothed ramp as a function of
    t = log(-psi) (zero inward of its band, so its gradient is proportional
    to the gradient of w everywhere), the minimal correction is
    u = P_w(chi f) - chi f in that measure, H is the cutoff derivative
    density against t, and the check is ||u||_w^2 <= 16 * int H (-psi) dV.
    Requires a smoothed cutoff and psi strictly negative on the nodes.
    """
    if cfg.smoothing <= 0:
        raise ConfigError("blocki check requires a smoothed cutoff (smoothing > 0)")
    rule = pair_rule(cfg, epsilon=cfg.epsilon)
    if cfg.epsilon is None:
        l1 = l1_distance(cfg.phi, cfg.psi, rule)
        cfg = replace(cfg, epsilon=max(cfg.epsilon_factor * l1, 1e-9))
        rule = pair_rule(cfg, epsilon=cfg.epsilon)
    psi_v = cfg.psi.evaluate(rule.nodes)
    if np.any(psi_v >= 0):
        raise BerglabError("psi must be strictly negative on all nodes")
    spec = CutoffSpec(phi=cfg.phi, psi=cfg.psi, epsilon=cfg.epsilon, smoothing=cfg.smoothing)
    chi = tramp_cutoff_values(spec, rule.nodes)
    fv = eval_poly_values(cfg.f, rule.nodes)
    hv = chi * fv

    space_w = WeightedSpace(cfg.domain, rule, -psi_v, label="measure (-psi) dV")
    fac = orthonormalize(
        gram_matrix(space_w, cfg.degree), graded_monomials(cfg.domain.n, cfg.degree)
    )
    proj = project(space_w, fac, hv)
    uv = eval_poly_values(proj.poly, rule.nodes) - hv
    lhs = space_w.norm_sq(uv)

    H = cutoff_derivative_density(spec, cfg.f, rule.nodes)
    rhs = 16.0 * float(weighted_sum(rule, H * (-psi_v)))
    band_nodes = int(np.count_nonzero(H))

    if rhs > 0:
        ratio = lhs / rhs
        verdict = bool(ratio <= 1 + cfg.smooth_slack)
    else:
        ratio = 0.0 if lhs <= 1e-12 else math.inf
        verdict = bool(lhs <= 1e-12)
    return BlockiResult(lhs=lhs, rhs=rhs, ratio=ratio, verdict=verdict, band_nodes=band_nodes)
