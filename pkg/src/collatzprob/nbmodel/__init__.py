"""Hierarchical NB2 regression of stopping times on log n and n mod 8."""

from .diagnostics import ess, split_rhat
from .likelihood import (
    GlmParams,
    Nb2Params,
    NonFiniteLogPosterior,
    log_likelihood,
    log_posterior,
    log_prior,
    nb2_log_pmf,
    nb2_log_pmf_array,
    nb2_sample,
)
from .posterior import (
    PARAM_NAMES,
    NbPosterior,
    posterior_predictive,
    predictive_log_densities,
    predictive_log_density,
)
from .sampler import DiagnosticsError, McmcConfig, adaptive_rwm, fit_mcmc

__all__ = [
    "PARAM_NAMES",
    "DiagnosticsError",
    "GlmParams",
    "McmcConfig",
    "Nb2Params",
    "NbPosterior",
    "NonFiniteLogPosterior",
    "adaptive_rwm",
    "ess",
    "fit_mcmc",
    "log_likelihood",
    "log_posterior",
    "log_prior",
    "nb2_log_pmf",
    "nb2_log_pmf_array",
    "nb2_sample",
    "posterior_predictive",
    "predictive_log_densities",
    "predictive_log_density",
    "split_rhat",
]
