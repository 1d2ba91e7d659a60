"""Numerical laboratory for weighted projections under plurisubharmonic weights.

Modules: quadrature (model domains, integration, shell classification),
weights (PSH expression trees, cutoffs), projection (weighted Gram matrices
and the holomorphic projection), bounds (the construction and its
inequality checks), ideals (integrability-based membership), cli (the
experiment runner).  Hot kernels are compiled when the extension is built;
a numpy fallback is selected automatically at import.
"""

__version__ = "0.1.0"

from ._backend import BACKEND
from .quadrature import (
    Domain,
    IntegralOutcome,
    QuadratureRule,
    build_domain,
    build_quadrature,
    build_shell_rule,
    integrate,
    integrate_shells,
)
from .weights import (
    ConstWeight,
    CutoffSpec,
    LogAbsLinear,
    ShiftWeight,
    SquareNorm,
    TruncateBelow,
    WeightMax,
    WeightSum,
    cutoff,
    cutoff_derivative_density,
    cutoff_values,
    enforce_negative,
    eval_weight,
    l1_distance,
    truncate,
    weight_from_config,
    weight_to_config,
)
from .projection import (
    GramFactorization,
    HoloPoly,
    WeightedSpace,
    eval_poly,
    eval_poly_values,
    gram_matrix,
    graded_monomials,
    orthonormalize,
    poly_const,
    poly_coordinate,
    project,
    weighted_inner,
    weighted_norm,
)
from .bounds import (
    TheoremConfig,
    TheoremReport,
    blocki_check,
    run_sweep,
    run_theorem_pair,
    run_truncation,
    weighted_mass,
)
from .ideals import (
    IdealComparison,
    MembershipQuery,
    classify_membership,
    compare_ideals,
    remark_suite,
)
