"""Weibull-tempered Pareto tails: POT fitting, adaptive thresholds and extreme quantiles."""

from .core import (
    Burr,
    Frechet,
    LogNormal,
    Pareto,
    Sample,
    TemperedParams,
    TemperedSampleSpec,
    h_tau,
    limit_density,
    limit_quantile,
    limit_survival,
    rng_stream,
    sample_tempered,
)
from .errors import DegenerateFitError, DomainError, InputError, NumericError, TemperedParetoError
from .estimators import (
    FitResult,
    FitTrace,
    POTView,
    default_tau_grid,
    extreme_quantile,
    fit_k,
    fit_mle_fixed_tau,
    fit_trace,
    fit_wls_fixed_tau,
    hill,
    log_likelihood,
    pot_excesses,
    score,
    ss_k,
    tail_prob,
    truncated_alpha,
    truncated_quantile,
    weissman_quantile,
    wls_objective,
)
from .asymptotics import (
    AsymptoticInfo,
    SecondOrderSpec,
    asymptotic_cov,
    bias_vector,
    confidence_interval,
    fisher_info,
    mc_fisher_oracle,
)
from .simulation import StudyConfig, StudyResult, paper_scenarios, run_study, scenario, true_quantile
from .diagnostics import (
    QQSeries,
    build_report,
    derivative_plot,
    empirical_quantile,
    fitted_qq_line,
    load_csv,
    pareto_qq,
    rolling_fit,
    weibull_qq,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateFitError",
    "DomainError",
    "InputError",
    "NumericError",
    "TemperedParetoError",
    "StudyConfig",
    "StudyResult",
    "paper_scenarios",
    "run_study",
    "scenario",
    "true_quantile",
    "Burr",
    "Frechet",
    "LogNormal",
    "Pareto",
    "Sample",
    "TemperedParams",
    "TemperedSampleSpec",
    "h_tau",
    "limit_density",
    "limit_quantile",
    "limit_survival",
    "rng_stream",
    "sample_tempered",
    "FitResult",
    "FitTrace",
    "POTView",
    "default_tau_grid",
    "extreme_quantile",
    "fit_k",
    "fit_mle_fixed_tau",
    "fit_trace",
    "fit_wls_fixed_tau",
    "hill",
    "log_likelihood",
    "pot_excesses",
    "score",
    "ss_k",
    "tail_prob",
    "truncated_alpha",
    "truncated_quantile",
    "weissman_quantile",
    "wls_objective",
    "AsymptoticInfo",
    "SecondOrderSpec",
    "asymptotic_cov",
    "bias_vector",
    "confidence_interval",
    "fisher_info",
    "mc_fisher_oracle",
    "QQSeries",
    "build_report",
    "derivative_plot",
    "empirical_quantile",
    "fitted_qq_line",
    "load_csv",
    "pareto_qq",
    "rolling_fit",
    "weibull_qq",
]
