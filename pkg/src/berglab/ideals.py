"""Integrability-based membership tests for weighted ideals of polynomials.

A polynomial f belongs to the ideal of a weight phi at level c > 0 when
|f|^2 e^-2c*phi is integrable near the singular locus of phi.  Membership is
decided numerically by the dyadic-shell classifier around the locus; In/Out
verdicts carry the fitted shell exponent and an Undecided verdict absorbs
anything inside the classifier's dead zone.

For a locus l(z) = c1 z1 + c2 z2 the integral is evaluated in sheared
coordinates (u = l(z), the other coordinate kept), a volume-preserving change
up to the constant |1/c_pivot|^2, on the model polydisc of the u variables.
There the locus is the coordinate hyperplane u = 0, shells tile the radial
panels exactly, and convergence versus divergence (a local property at the
locus) matches the original neighborhood.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .projection import HoloPoly, eval_poly_values, poly_coordinate
from .quadrature import build_domain, build_shell_rule, integrate_shells
from .weights import LogAbsLinear, log_atom_loci

VERDICT_IN = "in"
VERDICT_OUT = "out"
VERDICT_UNDECIDED = "undecided"

_VERDICT_FROM_KIND = {"finite": VERDICT_IN, "divergent": VERDICT_OUT, "undecided": VERDICT_UNDECIDED}


@dataclass(frozen=True)
class MembershipQuery:
    f: HoloPoly
    c: float
    weight: object
    domain: object
    locus: tuple = None  # linear functional; None: derive from the weight

    def __post_init__(self):
        if self.c <= 0:
            raise ConfigError("the ideal level c must be positive")
        if self.f.dim != self.domain.n:
            raise ConfigError("generator dimension does not match the domain")
        if self.weight.arity != self.domain.n:
            raise ConfigError("weight dimension does not match the domain")


@dataclass(frozen=True)
class MembershipResult:
    verdict: str
    fitted_exponent: object
    outcome: object  # IntegralOutcome or None for trivial cases

    def to_dict(self):
        d = {"verdict": self.verdict, "fitted_exponent": self.fitted_exponent}
        if self.outcome is not None:
            d["shells"] = [[int(k), v] for k, v in self.outcome.shell_contributions]
        return d


def _shear(locus, domain):
    """Pivoted unimodular shear sending the locus to a coordinate hyperplane.

    Returns (pivot, inverse, jac, u_domain): inverse maps u nodes to z points
    and jac is the constant real volume factor |1/c_pivot|^2.
    """
    c = tuple(complex(v) for v in locus)
    n = domain.n
    if len(c) != n or all(v == 0 for v in c):
        raise ConfigError("locus must be a nonzero linear functional")
    p = max(range(n), key=lambda j: abs(c[j]))
    jac = 1.0 / abs(c[p]) ** 2
    if n == 1:

        def inverse(U):
            return U / c[0]

        u_domain = build_domain("disc", (1.0,))
    else:
        q = 1 - p
        radii = [0.0, 0.0]
        radii[p] = 1.0
        base = domain.radii if domain.kind == "polydisc" else (domain.radii[0], domain.radii[0])
        radii[q] = base[q]

        def inverse(U):
            Z = np.empty_like(U)
            Z[:, q] = U[:, q]
            Z[:, p] = (U[:, p] - c[q] * U[:, q]) / c[p]
            return Z

        u_domain = build_domain("polydisc", tuple(radii))
    return p, inverse, jac, u_domain


def classify_membership(query, k_max=16, radial_n=12, angular_n=8):
    """In/Out/Undecided verdict for |f|^2 e^-2c*weight near the weight's locus.

    The zero polynomial is trivially In.  A weight without live log
    singularities (bounded below) makes every polynomial a member; the
    verdict is then In with no shell data.
    """
    if not query.f.coeffs:
        return MembershipResult(VERDICT_IN, None, None)
    locus = query.locus
    if locus is None:
        loci = log_atom_loci(query.weight)
        locus = loci[0] if loci else None
    if locus is None:
        return MembershipResult(VERDICT_IN, None, None)

    pivot, inverse, jac, u_domain = _shear(locus, query.domain)
    rule = build_shell_rule(
        u_domain,
        locus_coord=pivot,
        k_max=k_max,
        radial_n=radial_n,
        angular_n=angular_n,
    )

    def integrand(U):
        Z = inverse(U)
        fv = eval_poly_values(query.f, Z)
        wv = query.weight.evaluate(Z)
        return jac * (np.abs(fv) ** 2) * np.exp(-2.0 * query.c * wv)

    locus_u = tuple(1.0 if j == pivot else 0.0 for j in range(u_domain.n))
    outcome = integrate_shells(rule, integrand(rule.nodes), locus_u, k_max=k_max)
    return MembershipResult(
        _VERDICT_FROM_KIND[outcome.kind], outcome.fitted_exponent, outcome
    )


@dataclass(frozen=True)
class RemarkItem:
    label: str
    description: str
    expected: str
    result: MembershipResult

    @property
    def ok(self):
        return self.result.verdict == self.expected

    def to_dict(self):
        return {
            "label": self.label,
            "description": self.description,
            "expected": self.expected,
            "verdict": self.result.verdict,
            "fitted_exponent": self.result.fitted_exponent,
        }


@dataclass(frozen=True)
class RemarkReport:
    epsilon: float
    j: int
    items: tuple

    @property
    def verdicts(self):
        return tuple(it.result.verdict for it in self.items)

    @property
    def suite_ok(self):
        return all(it.ok for it in self.items) and VERDICT_UNDECIDED not in self.verdicts

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "j": self.j,
            "suite_ok": self.suite_ok,
            "items": [it.to_dict() for it in self.items],
        }


def remark_suite(epsilon, j, c=0.5, k_max=16):
    """Four-verdict counterexample family on the polydisc, level c = 1/2.

    With a = 4 - epsilon (0 < epsilon < 1) and the shifted-line weight
    a*ln|z1 + z2/j|: z1 is a member for the pure weight a*ln|z1| but not for
    the shifted one, z1 + z2/j is a member for the shifted weight, z2 is not
    a member for the pure one.  Expected verdicts (In, Out, In, Out).
    """
    if not (0.0 < epsilon < 1.0):
        raise ConfigError("epsilon must lie in (0, 1)")
    j = int(j)
    if j < 1:
        raise ConfigError("j must be at least 1")
    domain = build_domain("polydisc", (1.0, 1.0))
    a = 4.0 - epsilon
    w_pure = LogAbsLinear(coeffs=(1.0, 0.0), scale=a)
    w_shift = LogAbsLinear(coeffs=(1.0, 1.0 / j), scale=a)
    z1 = poly_coordinate(0, dim=2)
    z2 = poly_coordinate(1, dim=2)
    g = HoloPoly.from_dict({(1, 0): 1.0, (0, 1): 1.0 / j}, dim=2)

    def q(f, w, locus):
        return classify_membership(
            MembershipQuery(f=f, c=c, weight=w, domain=domain, locus=locus), k_max=k_max
        )

    items = (
        RemarkItem("a", "z1 against the pure-line weight", VERDICT_IN, q(z1, w_pure, (1.0, 0.0))),
        RemarkItem("b", "z1 against the shifted-line weight", VERDICT_OUT, q(z1, w_shift, (1.0, 1.0 / j))),
        RemarkItem("c", "z1 + z2/j against the shifted-line weight", VERDICT_IN, q(g, w_shift, (1.0, 1.0 / j))),
        RemarkItem("d", "z2 against the pure-line weight", VERDICT_OUT, q(z2, w_pure, (1.0, 0.0))),
    )
    return RemarkReport(epsilon=float(epsilon), j=j, items=items)


CONCLUSION_EQUAL = "equal"
CONCLUSION_A_NOT_SUBSET = "a_not_subset_b"
CONCLUSION_B_NOT_SUBSET = "b_not_subset_a"
CONCLUSION_INCOMPARABLE = "incomparable"
CONCLUSION_UNDECIDED = "undecided"


@dataclass(frozen=True)
class IdealComparison:
    generators_a: tuple
    generators_b: tuple
    c: float
    memberships_a_under_b: tuple  # MembershipResult per generator of A
    memberships_b_under_a: tuple
    conclusion: str
    note: str

    def to_dict(self):
        return {
            "c": self.c,
            "conclusion": self.conclusion,
            "note": self.note,
            "a_under_b": [m.to_dict() for m in self.memberships_a_under_b],
            "b_under_a": [m.to_dict() for m in self.memberships_b_under_a],
        }


def compare_ideals(generators_a, weight_a, generators_b, weight_b, c, domain, k_max=16):
    """Cross-membership comparison of two weighted ideals on generator lists.

    Tests every generator of A for membership under weight_b and vice versa.
    The conclusion is certified only on the tested generators (the note says
    so); any Undecided blocks a conclusion.
    """
    a_under_b = tuple(
        classify_membership(
            MembershipQuery(f=g, c=c, weight=weight_b, domain=domain), k_max=k_max
        )
        for g in generators_a
    )
    b_under_a = tuple(
        classify_membership(
            MembershipQuery(f=g, c=c, weight=weight_a, domain=domain), k_max=k_max
        )
        for g in generators_b
    )
    verdicts = [m.verdict for m in a_under_b + b_under_a]
    if VERDICT_UNDECIDED in verdicts:
        conclusion = CONCLUSION_UNDECIDED
    else:
        a_in_b = all(m.verdict == VERDICT_IN for m in a_under_b)
        b_in_a = all(m.verdict == VERDICT_IN for m in b_under_a)
        if a_in_b and b_in_a:
            conclusion = CONCLUSION_EQUAL
        elif b_in_a:
            conclusion = CONCLUSION_A_NOT_SUBSET
        elif a_in_b:
            conclusion = CONCLUSION_B_NOT_SUBSET
        else:
            conclusion = CONCLUSION_INCOMPARABLE
    return IdealComparison(
        generators_a=tuple(generators_a),
        generators_b=tuple(generators_b),
        c=float(c),
        memberships_a_under_b=a_under_b,
        memberships_b_under_a=b_under_a,
        conclusion=conclusion,
        note="equality and inclusions are certified only on the tested generators",
    )
