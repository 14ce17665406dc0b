"""t copulas with per-margin degrees of freedom.

Simulation, density evaluation, maximum-likelihood and rank-based
calibration, closed-form tail dependence, tail-asymmetry diagnostics and
a Monte Carlo VaR/ES engine with GARCH-filtered data ingestion.
"""

from .copula import (
    CopulaSpec,
    McEstimate,
    as_uniform_sample,
    copula_cdf,
    copula_logpdf,
    copula_pdf,
    log_likelihood,
    simulate,
    standard_t_copula_cdf,
    standard_t_copula_logpdf,
)
from .calibrate import (
    EstimationError,
    FitResult,
    LrtResult,
    corr_from_tau,
    fit_mle,
    kendall_tau,
    likelihood_ratio_test,
    observed_information,
    repair_correlation,
)
from .garch import GarchFit, empirical_pit, filter_residuals, fit_garch11, simulate_garch11
from .numerics import QuadratureError, QuadratureResult, bvn_cdf, integrate
from .risk import (
    EmpiricalMargin,
    NormalMargin,
    Portfolio,
    RiskReport,
    StudentTMargin,
    StudySummary,
    finite_sample_study,
    model_risk_study,
    paired_small_sample_study,
    var_es,
)
from .taildep import (
    AsymmetryReport,
    TailDepReport,
    asymmetry,
    lambda_grid,
    lambda_multidof,
    lambda_quadrant,
    lambda_standard_t,
    numerical_tdc_limit,
    omega,
    tail_dependence,
)

__version__ = "0.1.0"
