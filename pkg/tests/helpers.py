"""Shared synthetic fixtures for the test suite."""
import datetime as dt
import math

import numpy as np

from batsfit.covariates import PeriodicSplineBasis, YearlyCovariate
from batsfit.distributions import BatsParams
from batsfit.estimation import ObservationSeries
from batsfit.seasonal import LocationCoeffs, LogScaleCoeffs, SeasonalBatsModel
from batsfit.simulate import daily_dates, simulate_series

BASIS = PeriodicSplineBasis()


def covariate(first=1980, last=2009, start=5.8, slope=0.006):
    years = np.arange(first, last + 1)
    return YearlyCovariate(years, start + slope * (years - first))


def seasonal_shape(amplitude):
    kn = np.asarray(BASIS.knots)[1:]
    return tuple(amplitude * np.cos(2 * np.pi * kn / BASIS.period))


def true_model(cov=None, kappa0=0.1, kappa1=-0.1, nu=8.0, beta1=2.0):
    """Moderately seasonal model with a C(y) trend of slope ``beta1``."""
    cov = cov or covariate()
    c0 = float(cov.values[0])
    seas = seasonal_shape(-8.0)
    sc = seasonal_shape(0.3)
    return SeasonalBatsModel(
        LocationCoeffs(10 - beta1 * c0 - 1.5, seas, beta1, 0.1, 0.0),
        LocationCoeffs(10 - beta1 * c0 + 1.5, seas, beta1, 0.0, 0.1),
        LogScaleCoeffs(0.5, sc), LogScaleCoeffs(0.3, sc),
        kappa0, kappa1, math.log(nu), BASIS, cov, dt.date(1980, 1, 1))


def simulated(model=None, first=1980, last=2009, seed=1, missing=0.0):
    model = model or true_model()
    rng = np.random.default_rng(seed)
    return simulate_series(model, daily_dates(f"{first}-01-01", f"{last}-12-31"), rng,
                           missing_fraction=missing)


def gaussian_series(first=1990, last=2009, seed=0, sd=2.0, seasonal=8.0, cov=None):
    cov = cov or covariate(first, last)
    dates = daily_dates(f"{first}-01-01", f"{last}-12-31")
    d = np.arange(dates.size)
    rng = np.random.default_rng(seed)
    vals = 10 - seasonal * np.cos(2 * np.pi * d / 365.25) + sd * rng.normal(size=d.size)
    return ObservationSeries.from_arrays(dates, vals, cov)


def random_params(rng, kappa_range=(-0.4, 0.5)):
    nu = rng.uniform(3.0, 30.0)
    phi0 = rng.normal(0, 2)
    return BatsParams(nu=nu, phi0=phi0, phi1=phi0 + rng.uniform(0, 3),
                      tau0=rng.uniform(0.3, 3), tau1=rng.uniform(0.3, 3),
                      kappa0=rng.uniform(*kappa_range), kappa1=rng.uniform(*kappa_range))


def head(series, n):
    return ObservationSeries(series.station_id, series.dates[:n], series.values[:n],
                             series.first_obs, series.covariate)


def random_feasible_model(rng, base, data, bats_negloglik):
    """Perturbed copy of ``base`` whose support contains every observation."""
    while True:
        v = base.vector + rng.normal(0, 0.05, base.vector.size)
        v[-3] = rng.uniform(-0.3, 0.4)
        v[-2] = rng.uniform(-0.3, 0.4)
        v[-1] = math.log(rng.uniform(4, 30))
        m = base.with_vector(v)
        if math.isfinite(bats_negloglik(m, data)):
            return m


def central_difference(f, v, rel_step=1e-5):
    g = np.empty(v.size)
    for i in range(v.size):
        h = rel_step * max(1.0, abs(v[i]))
        vp = v.copy()
        vm = v.copy()
        vp[i] += h
        vm[i] -= h
        g[i] = (f(vp) - f(vm)) / (2 * h)
    return g
