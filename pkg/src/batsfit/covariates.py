"""Seasonal and long-term covariates.

The seasonal basis is a set of periodic cubic B-splines on equally spaced
knots. ``n_basis + 1`` knots carry ``n_basis + 1`` periodic B-splines that
sum to one; the one anchored at knot 0 is dropped, so the remaining
``n_basis`` functions together with a separate intercept span the full
periodic spline space without redundancy.
"""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, InsufficientDataError, ParseError

YEAR_DAYS = 365.25


def _cardinal_cubic(t):
    """Cardinal cubic B-spline supported on [0, 4)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t >= 0) & (t < 1)
    out[m] = t[m] ** 3 / 6.0
    m = (t >= 1) & (t < 2)
    tm = t[m]
    out[m] = (-3 * tm**3 + 12 * tm**2 - 12 * tm + 4) / 6.0
    m = (t >= 2) & (t < 3)
    tm = t[m]
    out[m] = (3 * tm**3 - 24 * tm**2 + 60 * tm - 44) / 6.0
    m = (t >= 3) & (t < 4)
    out[m] = (4 - t[m]) ** 3 / 6.0
    return out


@dataclass(frozen=True)
class PeriodicSplineBasis:
    n_basis: int = 8
    period: float = YEAR_DAYS
    knots: tuple = field(default=None)

    def __post_init__(self):
        if self.n_basis < 4:
            raise ConfigError("periodic spline basis needs n_basis >= 4")
        if not self.period > 0:
            raise ConfigError("period must be positive")
        if self.knots is None:
            m = self.n_basis + 1
            object.__setattr__(
                self, "knots", tuple(float(k) * self.period / m for k in range(m)))
        elif len(self.knots) != self.n_basis + 1:
            raise ConfigError("expected n_basis + 1 knots")

    @property
    def spacing(self):
        return self.period / (self.n_basis + 1)

    def full(self, d):
        """All ``n_basis + 1`` periodic B-splines at ``d``; rows sum to one."""
        d = np.atleast_1d(np.asarray(d, dtype=float))
        m = self.n_basis + 1
        knots = np.asarray(self.knots)
        t = np.mod((d[:, None] - knots[None, :]) / self.spacing, m)
        return _cardinal_cubic(t)

    def __call__(self, d):
        """Design matrix ``(len(d), n_basis)``."""
        return self.full(d)[:, 1:]

    def to_dict(self):
        return {"n_basis": self.n_basis, "period": self.period,
                "knots": list(self.knots), "dropped_index": 0}

    @classmethod
    def from_dict(cls, doc):
        return cls(int(doc["n_basis"]), float(doc["period"]),
                   tuple(float(k) for k in doc["knots"]))


def build_periodic_spline_basis(n_basis=8, period=YEAR_DAYS):
    return PeriodicSplineBasis(n_basis, period)


def harmonic_pair(d, period=YEAR_DAYS):
    """``(cos(2 pi d / period), sin(2 pi d / period))``."""
    ang = 2.0 * np.pi * np.asarray(d, dtype=float) / period
    return np.cos(ang), np.sin(ang)


def _as_days(x):
    if isinstance(x, (dt.date, str)):
        return np.datetime64(x, "D").astype(np.int64)
    return np.asarray(x, dtype="datetime64[D]").astype(np.int64)


def day_of_year(date, first_obs):
    """Days elapsed since ``first_obs``, modulo 365.25."""
    elapsed = _as_days(date) - _as_days(first_obs)
    if np.any(elapsed < 0):
        raise DomainError("date precedes the first observation")
    out = np.mod(elapsed.astype(float), YEAR_DAYS)
    return float(out) if np.ndim(out) == 0 else out


def calendar_year(date):
    return np.asarray(date, dtype="datetime64[Y]").astype(np.int64) + 1970


@dataclass(frozen=True)
class YearlyCovariate:
    """One value per calendar year (log CO2-equivalent in practice)."""

    years: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        years = np.asarray(self.years, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if years.shape != values.shape or years.ndim != 1:
            raise ConfigError("covariate years and values must be 1-d and equal length")
        if years.size and np.any(np.diff(years) <= 0):
            raise ConfigError("covariate years must be strictly increasing")
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "values", values)

    def __call__(self, years):
        years = np.asarray(years, dtype=np.int64)
        idx = np.searchsorted(self.years, years)
        idx_c = np.clip(idx, 0, max(self.years.size - 1, 0))
        ok = (self.years.size > 0) & (self.years[idx_c] == years)
        if not np.all(ok):
            missing = np.unique(np.asarray(years)[~ok])
            raise DomainError(f"covariate has no value for year(s) {missing.tolist()}")
        out = self.values[idx_c]
        return float(out) if out.ndim == 0 else out

    def covers(self, years):
        return bool(np.all(np.isin(np.asarray(years), self.years)))

    def to_dict(self):
        return {"years": self.years.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["years"], dtype=np.int64),
                   np.asarray(doc["values"], dtype=float))


def extend_covariate(primary: YearlyCovariate, auxiliary: YearlyCovariate,
                     target_years) -> YearlyCovariate:
    """Fill ``target_years`` missing from ``primary`` by OLS on ``auxiliary``.

    Existing primary values are kept as they are.
    """
    overlap = np.intersect1d(primary.years, auxiliary.years)
    if overlap.size < 3:
        raise InsufficientDataError(
            f"need at least 3 overlapping years to regress, found {overlap.size}")
    y = primary(overlap)
    x = auxiliary(overlap)
    design = np.column_stack([np.ones_like(x), x])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    target = np.setdiff1d(np.asarray(target_years, dtype=np.int64), primary.years)
    pred = coef[0] + coef[1] * auxiliary(target) if target.size else np.zeros(0)
    years = np.concatenate([primary.years, target])
    values = np.concatenate([primary.values, pred])
    order = np.argsort(years)
    return YearlyCovariate(years[order], values[order])


def read_covariate_csv(path) -> YearlyCovariate:
    """Read a ``year,value`` CSV (UTF-8, one row per year)."""
    years, values = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        rows = (row for row in csv.reader(fh))
        header = None
        for lineno, row in enumerate(rows, start=1):
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [c.strip().lower() for c in row]
                if header != ["year", "value"]:
                    raise ParseError("covariate header must be 'year,value'", lineno)
                continue
            if len(row) != 2:
                raise ParseError("expected 2 fields", lineno)
            try:
                years.append(int(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
    if header is None:
        raise ParseError("missing header")
    order = np.argsort(years, kind="stable")
    years_a = np.asarray(years, dtype=np.int64)[order]
    if np.any(np.diff(years_a) == 0):
        raise ParseError("duplicate covariate year")
    return YearlyCovariate(years_a, np.asarray(values)[order])


def write_covariate_csv(cov: YearlyCovariate, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write("year,value\n")
        for y, v in zip(cov.years.tolist(), cov.values.tolist()):
            fh.write(f"{y},{v!r}\n")
