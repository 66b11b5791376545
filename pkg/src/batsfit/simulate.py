"""Synthetic daily series drawn from a fitted or hand-built seasonal model."""
from __future__ import annotations


import numpy as np

from .covariates import calendar_year, day_of_year
from .distributions import bats_quantile, skew_normal_quantile
from .errors import ConfigError
from .estimation.series import ObservationSeries


def daily_dates(start, end):
    """Every calendar day from ``start`` to ``end`` inclusive."""
    start = np.datetime64(start, "D")
    end = np.datetime64(end, "D")
    if end < start:
        raise ConfigError("end date precedes start date")
    return np.arange(start, end + np.timedelta64(1, "D"), dtype="datetime64[D]")


def simulate_series(model, dates, rng, station_id="synthetic", missing_fraction=0.0):
    """One value per date from ``model`` (BATs or skew-normal) by inversion."""
    dates = np.asarray(dates, dtype="datetime64[D]")
    if missing_fraction:
        keep = rng.random(dates.size) >= missing_fraction
        dates = dates[keep]
    d = day_of_year(dates, model.first_obs)
    years = calendar_year(dates)
    p = model.params_at(d, years)
    u = rng.random(dates.size)
    if model.kind == "bats":
        x = bats_quantile(p, u)
    elif model.kind == "skew":
        x = skew_normal_quantile(p, u)
    else:
        raise ConfigError(f"cannot simulate from model kind {model.kind!r}")
    return ObservationSeries(station_id, dates, np.asarray(x, dtype=float),
                             model.first_obs, model.covariate)
