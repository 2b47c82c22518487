"""Population indices, limit representations and asymptotic covariances."""

from .bundle import (
    KCrossCheck,
    TheoremOneBundle,
    exact_index,
    kakwani_exact_candidates,
    kakwani_literal_k,
    r_k,
    theorem_one_bundle,
)
from .covariance import (
    CovarianceEstimate,
    covariance_analytic,
    covariance_plugin,
    plugin_terms,
)
from .diagnostics import DiagnosticIssue, DiagnosticReport, format_diagnostics, hypothesis_diagnostics
from .empirical import alpha_term, beta_term, quantile_process_term
from .limits import LimitFunctions, limit_functions
from .models import (
    DistributionModel,
    Exponential,
    GaussianCopula,
    Lognormal,
    Marginal,
    PointMass,
    Uniform,
    marginal_from_dict,
)

__all__ = [
    "CovarianceEstimate",
    "DiagnosticIssue",
    "DiagnosticReport",
    "DistributionModel",
    "Exponential",
    "GaussianCopula",
    "KCrossCheck",
    "LimitFunctions",
    "Lognormal",
    "Marginal",
    "PointMass",
    "TheoremOneBundle",
    "Uniform",
    "alpha_term",
    "beta_term",
    "covariance_analytic",
    "covariance_plugin",
    "exact_index",
    "format_diagnostics",
    "hypothesis_diagnostics",
    "kakwani_exact_candidates",
    "kakwani_literal_k",
    "limit_functions",
    "marginal_from_dict",
    "plugin_terms",
    "quantile_process_term",
    "r_k",
    "theorem_one_bundle",
]
