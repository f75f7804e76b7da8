"""Bayesian conditional logistic regression for 1:1 matched-pair binary data.

The pipeline: partition pairs by response agreement, fit a pre-model to the
concordant pairs, build an informative prior over the nuisance coefficients
from that fit, sample the treatment-effect posterior on the discordant
pairs by Hamiltonian Monte Carlo, and test via credible or highest-density
intervals. A simulation harness reproduces the matched-pair power/size
study design at desk scale.
"""

from ._backend import active_backend
from .clr import ClrMleFit, Coefficients, clr_fit_mle, clr_grad, clr_loglik, clr_neg_hessian
from .data import (
    DiscordantDiffs,
    PairedDataset,
    PairPartition,
    difference_discordant,
    partition_pairs,
)
from .errors import (
    AllDivergent,
    DimensionMismatch,
    EmptyDraws,
    EmptyStudy,
    InsufficientConcordant,
    MalformedInput,
    MalformedPairing,
    NoDiscordantPairs,
    NonFiniteState,
    OddRowCount,
    PairlogitError,
    RankDeficient,
    SeparationDetected,
    SingularSandwich,
    TooFewDraws,
)
from .inference import (
    IntervalMethod,
    IntervalSet,
    TestDecision,
    decide,
    equal_tailed_cr,
    hpd_contiguous,
    hpd_disjoint,
    point_estimate,
)
from .premodel import (
    GeeFit,
    LrFit,
    PremodelFit,
    gee_fit_pairs,
    irls_fit,
    premodel_concordant,
)
from .priors import (
    PriorKind,
    PriorSpec,
    PriorState,
    build_prior_spec,
    fisher_info_ww,
    g_conditional_draw,
    log_prior_and_grad,
    orthogonalize_treatment,
)
from .sampler import (
    Diagnostics,
    PosteriorSamples,
    SamplerConfig,
    diagnose,
    sample_posterior,
)
from .simulate import (
    MethodMetrics,
    SimConfig,
    SimResult,
    assign_treatment,
    gen_design_matrix,
    parse_method,
    response_probability,
    run_iteration,
    run_study,
)

__version__ = "0.1.0"

__all__ = [
    "active_backend",
    "AllDivergent",
    "assign_treatment",
    "build_prior_spec",
    "clr_fit_mle",
    "clr_grad",
    "clr_loglik",
    "clr_neg_hessian",
    "ClrMleFit",
    "Coefficients",
    "decide",
    "diagnose",
    "Diagnostics",
    "difference_discordant",
    "DimensionMismatch",
    "DiscordantDiffs",
    "EmptyDraws",
    "EmptyStudy",
    "equal_tailed_cr",
    "fisher_info_ww",
    "g_conditional_draw",
    "gee_fit_pairs",
    "GeeFit",
    "gen_design_matrix",
    "hpd_contiguous",
    "hpd_disjoint",
    "InsufficientConcordant",
    "IntervalMethod",
    "IntervalSet",
    "irls_fit",
    "log_prior_and_grad",
    "LrFit",
    "MalformedInput",
    "MalformedPairing",
    "MethodMetrics",
    "NoDiscordantPairs",
    "NonFiniteState",
    "OddRowCount",
    "PairedDataset",
    "PairlogitError",
    "PairPartition",
    "parse_method",
    "partition_pairs",
    "point_estimate",
    "PosteriorSamples",
    "premodel_concordant",
    "PremodelFit",
    "PriorKind",
    "PriorSpec",
    "PriorState",
    "RankDeficient",
    "response_probability",
    "run_iteration",
    "run_study",
    "sample_posterior",
    "SamplerConfig",
    "SeparationDetected",
    "SimConfig",
    "SimResult",
    "SingularSandwich",
    "TestDecision",
    "TooFewDraws",
    "orthogonalize_treatment",
]
