"""Multiple standard, modified and combined gamma kernel density estimation
with Bayesian adaptive bandwidths on the nonnegative orthant."""

__version__ = "0.1.0"

from .bandwidth import (BoundaryPolicy, PriorConfig, bayes_adaptive_bandwidths,
                        bayes_bandwidth_oracle, mixture_weights, posterior_log_density)
from .errors import (ConfigurationError, DegenerateTermError, DomainError, FitError,
                     GammaKDEError, NumericError, SingularWeightError, UsageError)
from .estimators import (UNIFORM, BandwidthSet, FittedDensity, ParametricStart,
                         density_estimate, density_on_grid, fit_parametric_start,
                         kernel_density, leave_one_out_density, weight_estimate)
from .evaluation import (IntegrationDomain, IseReport, LoglikReport, asymptotic_bias,
                         asymptotic_variance, holdout_loglik, ise, replicate_ise)
from .kernels import KernelKind, KernelSelector, kernel_moments, rho
from .scenarios import MarginMixture, ScenarioSpec, builtin

__all__ = [
    "BandwidthSet", "BoundaryPolicy", "ConfigurationError", "DegenerateTermError",
    "DomainError", "FitError", "FittedDensity", "GammaKDEError", "IntegrationDomain",
    "IseReport", "KernelKind", "KernelSelector", "LoglikReport", "MarginMixture",
    "NumericError", "ParametricStart", "PriorConfig", "ScenarioSpec",
    "SingularWeightError", "UNIFORM", "UsageError", "asymptotic_bias",
    "asymptotic_variance", "bayes_adaptive_bandwidths", "bayes_bandwidth_oracle",
    "builtin", "density_estimate", "density_on_grid", "fit_parametric_start",
    "holdout_loglik", "ise", "kernel_density", "kernel_moments",
    "leave_one_out_density", "mixture_weights", "posterior_log_density",
    "replicate_ise", "rho", "weight_estimate",
]
