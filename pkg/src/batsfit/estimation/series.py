"""Daily observation series with optional integer weights."""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from ..covariates import YearlyCovariate, calendar_year, day_of_year
from ..errors import DomainError
from ..seasonal import location_design


@dataclass(frozen=True, eq=False)
class ObservationSeries:
    """Dated daily values. Missing days are simply absent.

    ``weights`` holds how many times each observation counts in a likelihood;
    it is all ones for observed data and takes bootstrap multiplicities after
    resampling whole years.
    """

    station_id: str
    dates: np.ndarray
    values: np.ndarray
    first_obs: dt.date
    covariate: YearlyCovariate
    weights: np.ndarray = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype="datetime64[D]")
        values = np.asarray(self.values, dtype=float)
        if dates.shape != values.shape or dates.ndim != 1:
            raise DomainError("dates and values must be 1-d and equal length")
        if dates.size > 1 and np.any(np.diff(dates.astype(np.int64)) <= 0):
            raise DomainError("dates must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DomainError("values must be finite")
        weights = (np.ones(values.size) if self.weights is None
                   else np.asarray(self.weights, dtype=float))
        if weights.shape != values.shape:
            raise DomainError("weights must match values")
        first = self.first_obs
        if isinstance(first, np.datetime64):
            first = first.astype(object)
        elif isinstance(first, str):
            first = dt.date.fromisoformat(first)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "first_obs", first)

    @classmethod
    def from_arrays(cls, dates, values, covariate, station_id="synthetic", first_obs=None):
        dates = np.asarray(dates, dtype="datetime64[D]")
        if first_obs is None:
            first_obs = dates[0].astype(object) if dates.size else dt.date(1970, 1, 1)
        return cls(station_id, dates, values, first_obs, covariate)

    def __len__(self):
        return self.values.size

    @property
    def years(self):
        return calendar_year(self.dates)

    @property
    def unique_years(self):
        return np.unique(self.years)

    @property
    def total_weight(self):
        return float(self.weights.sum())

    def day_index(self, first_obs=None):
        return day_of_year(self.dates, first_obs or self.first_obs)

    def _replace(self, mask=None, values=None, weights=None):
        m = slice(None) if mask is None else mask
        return ObservationSeries(
            self.station_id, self.dates[m],
            (self.values if values is None else values)[m], self.first_obs,
            self.covariate, (self.weights if weights is None else weights)[m])

    def select_years(self, years):
        """Observations whose calendar year is in ``years`` (weights kept)."""
        return self._replace(np.isin(self.years, np.asarray(years)))

    def drop_years(self, years):
        return self._replace(~np.isin(self.years, np.asarray(years)))

    def negated(self):
        return self._replace(values=-self.values)

    def with_year_counts(self, counts):
        """Reweight by how often each year was drawn; undrawn years vanish."""
        uy, inv = np.unique(self.years, return_inverse=True)
        w = np.array([counts.get(int(y), 0) for y in uy], dtype=float)[inv]
        return self._replace(w > 0, weights=self.weights * w)

    def design(self, basis, covariate, first_obs):
        """Cached location design rows for this series under a model frame."""
        key = (basis, id(covariate), first_obs)
        hit = self._cache.get(key)
        if hit is None:
            d = self.day_index(first_obs)
            X = location_design(basis, d, covariate(self.years))
            hit = (d, X)
            self._cache[key] = hit
        return hit
