"""Exact verification of bias attenuation when adjusting for a
nondifferentially mismeasured confounder."""

from .attenuation import (
    AttenuationVerdict,
    ChainDirection,
    Finding,
    HuntConfig,
    ImplicationsReport,
    ObservedData,
    diagnose_assumptions,
    hunt_counterexamples,
    testable_implications,
    verify_att_attenuation,
    verify_theorem1,
)
from .dependence import (
    CheckResult,
    DependenceProfile,
    Status,
    TaperMode,
    check_mlr,
    check_prd,
    check_tapered,
    kernel_profile,
    profile,
    verify_implications,
)
from .estimands import (
    AttReport,
    DomainError,
    EffectTriple,
    EstimandReport,
    Scale,
    compute_att,
    compute_estimands,
    effects,
)
from .model import (
    CondMatrix,
    Direction,
    InvalidModelError,
    ModelSpec,
    MonotoneClass,
    Pmf,
    classify_monotone,
    marginal_c,
    outcome_given_ac,
    posterior_u_given_ac,
    posterior_u_given_c,
    propensity_given_c,
    validate_model,
)

__version__ = "0.1.0"

__all__ = [
    "AttenuationVerdict",
    "ChainDirection",
    "Finding",
    "HuntConfig",
    "ImplicationsReport",
    "ObservedData",
    "diagnose_assumptions",
    "hunt_counterexamples",
    "testable_implications",
    "verify_att_attenuation",
    "verify_theorem1",
    "CheckResult",
    "DependenceProfile",
    "Status",
    "TaperMode",
    "check_mlr",
    "check_prd",
    "check_tapered",
    "kernel_profile",
    "profile",
    "verify_implications",
    "AttReport",
    "DomainError",
    "EffectTriple",
    "EstimandReport",
    "Scale",
    "compute_att",
    "compute_estimands",
    "effects",
    "CondMatrix",
    "Direction",
    "InvalidModelError",
    "ModelSpec",
    "MonotoneClass",
    "Pmf",
    "classify_monotone",
    "marginal_c",
    "outcome_given_ac",
    "posterior_u_given_ac",
    "posterior_u_given_c",
    "propensity_given_c",
    "validate_model",
]
