"""Nonstationary spatial modelling by aligning regional variograms and embedding warped distances."""

from ._nsdeform import (
    ConfigError,
    DomainError,
    Error,
    FitResult,
    IoError,
    NumericalError,
    ParameterError,
    VariogramModel,
    WarpingFunction,
    cmds,
    crps_gaussian,
    determine_ht,
    dp_align,
    fit_matern_mle,
    gaussian_loglik,
    krige,
    logs_gaussian,
    nmse_curve,
    register_variograms,
    regular_grid,
    run,
    score,
    simulate,
    warped_distance_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainError",
    "Error",
    "FitResult",
    "IoError",
    "NumericalError",
    "ParameterError",
    "VariogramModel",
    "WarpingFunction",
    "cmds",
    "crps_gaussian",
    "determine_ht",
    "dp_align",
    "fit_matern_mle",
    "gaussian_loglik",
    "krige",
    "logs_gaussian",
    "nmse_curve",
    "register_variograms",
    "regular_grid",
    "run",
    "score",
    "simulate",
    "warped_distance_matrix",
]
