"""Empirical likelihood confidence regions and intervals for the GPD tail.

Peaks-over-threshold inference in the heavy-tail case: Zhang's estimator,
GPD maximum likelihood, the empirical likelihood ratio for Zhang's
estimating equations, joint regions, tail-index intervals and a
Monte-Carlo coverage harness.
"""

from .el_core import ElSolution, el_ratio, el_solution, g_vec, moment_oracles, solve_lambda
from .errors import (
    CalibrationError,
    DomainError,
    ElConvergenceError,
    EstimationError,
    FitFailure,
    ProfileFailure,
)
from .mle import MleFit, gpd_loglik, mle_cov, mle_fit
from .models import ExcessSample, GpdParams, ModelSpec, extract_excesses, sample
from .profile_ci import ConfidenceInterval, elp_ci, elw_ci, hill_estimator, profile_sigma, zhang_wald_ci
from .regions import ConfidenceRegion, GridSpec, el_region, ml_wald_region, region_contains, zhang_wald_region
from .sim import CoverageRecord, TrueScale, run_coverage, true_scale
from .statfun import chi2_quantile, critical_value, f_quantile, fisher_critical
from .zhang import ZhangFit, sigma_matrix, solve_b, zhang_fit

__version__ = "0.1.0"
