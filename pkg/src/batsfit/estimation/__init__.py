"""Likelihoods, maximum-likelihood fitting, quantile regression and KDE."""
from .series import ObservationSeries
from .likelihood import (
    bats_negloglik,
    negloglik_gradient,
    skew_negloglik,
    gpd_negloglik,
)
from .fitting import FitConfig, FitResult, fit_bats, fit_gpd, fit_skew_normal, fit_threshold
from .quantreg import pinball_loss, quantile_regression
from .kde import select_bandwidth, windowed_kde

__all__ = [
    "ObservationSeries",
    "bats_negloglik",
    "negloglik_gradient",
    "skew_negloglik",
    "gpd_negloglik",
    "FitConfig",
    "FitResult",
    "fit_bats",
    "fit_gpd",
    "fit_skew_normal",
    "fit_threshold",
    "pinball_loss",
    "quantile_regression",
    "select_bandwidth",
    "windowed_kde",
]
