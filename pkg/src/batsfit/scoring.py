"""CRPS and tail-weighted CRPS with blocked cross-validation over years."""
from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError, DomainError, InsufficientDataError, IntegrityError
from .estimation.quantreg import quantile_regression
from .estimation.series import ObservationSeries
from .seasonal import LogScaleCoeffs, scale_design

log = logging.getLogger(__name__)

ROWS = ("Year", "DJF", "MAM", "JJA", "SON")
UPPER_LEVELS = (0.95, 0.99, 0.995)
LOWER_LEVELS = (0.05, 0.01, 0.005)
BOUND_PROB = 1e-8
_MONOTONE_SLACK = 1e-12


class _Recorder:
    """Wraps a cdf, remembering every evaluation for a monotonicity audit."""

    def __init__(self, cdf):
        self.cdf = cdf
        self.z = []
        self.f = []

    def __call__(self, z):
        v = float(self.cdf(z))
        self.z.append(z)
        self.f.append(v)
        return v

    def check(self):
        if not self.z:
            return
        z = np.asarray(self.z)
        f = np.asarray(self.f)
        if np.any(~np.isfinite(f)) or f.min() < -_MONOTONE_SLACK or f.max() > 1 + _MONOTONE_SLACK:
            raise IntegrityError("cdf left [0, 1] during integration")
        o = np.argsort(z, kind="stable")
        if np.any(np.diff(f[o]) < -1e-10):
            i = int(np.argmin(np.diff(f[o])))
            raise IntegrityError(
                f"cdf is not monotone near z={z[o][i]:.6g} ({f[o][i]:.12g} > {f[o][i + 1]:.12g})")


def _integrate(fun, points, tol):
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        if b > a:
            val, _ = quad(fun, a, b, epsabs=tol * 0.1, epsrel=1e-10, limit=200)
            total += val
    return total


def crps(cdf, x, lower=None, upper=None, quantile=None, breakpoints=(), tol=1e-6):
    """Integral of ``(F(y) - 1[y >= x])^2`` over the real line.

    The range is ``[lower, upper]`` extended to include ``x``; when bounds
    are omitted they come from ``quantile`` at ``1e-8`` and ``1 - 1e-8``.
    ``breakpoints`` (kinks or jumps of ``cdf``) split the integration.
    """
    x = float(x)
    if not math.isfinite(x):
        raise DomainError("observation must be finite")
    if lower is None or upper is None:
        if quantile is None:
            raise DomainError("integration bounds or a quantile function are required")
        lower = float(quantile(BOUND_PROB)) if lower is None else lower
        upper = float(quantile(1.0 - BOUND_PROB)) if upper is None else upper
    lo, hi = min(float(lower), x), max(float(upper), x)
    rec = _Recorder(cdf)
    pts = sorted({lo, hi, x, *[float(b) for b in breakpoints if lo < b < hi]})

    def below(y):
        return rec(y) ** 2

    def above(y):
        return (1.0 - rec(y)) ** 2

    left = [p for p in pts if p <= x]
    right = [p for p in pts if p >= x]
    total = _integrate(below, left, tol) + _integrate(above, right, tol)
    rec.check()
    return total


def gaussian_crps(mu, sigma, x):
    """Closed form for a normal predictive distribution."""
    from scipy.special import ndtr

    z = (np.asarray(x, dtype=float) - mu) / sigma
    pdf = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    return sigma * (z * (2.0 * ndtr(z) - 1.0) + 2.0 * pdf - 1.0 / math.sqrt(math.pi))


# ---------------------------------------------------------------------------
# censoring and the weighted score
# ---------------------------------------------------------------------------


class Negated:
    """Distribution of ``-X`` for a continuous predictive ``X``."""

    def __init__(self, dist):
        self.dist = dist

    def cdf(self, y):
        return 1.0 - self.dist.cdf(-np.asarray(y, dtype=float))

    def quantile(self, q):
        return -self.dist.quantile(1.0 - np.asarray(q, dtype=float))


@dataclass(frozen=True)
class CensoredCdf:
    """Cdf of ``Z = max(X, mu)``.

    ``kind="full"`` wraps a model of the whole distribution; ``kind="gpd"``
    wraps an exceedance model whose cdf is rescaled onto ``[p_mu, 1]``.
    """

    kind: str
    mu: float
    base: object
    p_mu: float = None

    def __post_init__(self):
        if self.kind not in ("full", "gpd"):
            raise ConfigError("kind must be 'full' or 'gpd'")
        if self.kind == "gpd" and not (self.p_mu is not None and 0.0 < self.p_mu < 1.0):
            raise ConfigError("gpd kind needs p_mu in (0, 1)")

    def __call__(self, z):
        z = float(z)
        if z < self.mu:
            return 0.0
        f = float(self.base.cdf(z))
        if self.kind == "gpd":
            return self.p_mu + (1.0 - self.p_mu) * f
        return f

    cdf = __call__

    def quantile(self, p):
        p = float(p)
        if self.kind == "full":
            return max(float(self.base.quantile(p)), self.mu)
        if p <= self.p_mu:
            return self.mu
        return float(self.base.quantile((p - self.p_mu) / (1.0 - self.p_mu)))

    def censor(self, x):
        return max(float(x), self.mu)


def wcrps(cz: CensoredCdf, x_censored, q, upper=None, tol=1e-6):
    """Integral of ``(F_Z(y) - 1[y >= x])^2`` over ``y >= q``."""
    x = float(x_censored)
    q = float(q)
    if x < cz.mu - 1e-12:
        raise DomainError("observation must already be censored at mu")
    if q < cz.mu - 1e-12:
        raise DomainError("weight threshold q must not lie below mu")
    if upper is None:
        upper = cz.quantile(1.0 - BOUND_PROB)
    hi = max(float(upper), x, q)
    rec = _Recorder(cz)
    total = 0.0
    if x > q:
        total += _integrate(lambda y: rec(y) ** 2, [q, x], tol)
        total += _integrate(lambda y: (1.0 - rec(y)) ** 2, [x, hi], tol)
    else:
        total += _integrate(lambda y: (1.0 - rec(y)) ** 2, [q, hi], tol)
    rec.check()
    return total


# ---------------------------------------------------------------------------
# folds, seasons and comparison tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CvFolds:
    blocks: tuple

    @property
    def assignment(self):
        return {int(y): k for k, b in enumerate(self.blocks) for y in b}

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)


def make_cv_folds(years) -> CvFolds:
    """Consecutive blocks of 4 or 5 years, as few blocks as possible, with
    the larger blocks first."""
    years = sorted({int(y) for y in years})
    n = len(years)
    if n < 8:
        raise InsufficientDataError(f"cross-validation needs at least 8 years, got {n}")
    k = math.ceil(n / 5)
    if 4 * k > n:
        raise InsufficientDataError(f"{n} years cannot be split into blocks of 4 or 5")
    base, extra = divmod(n, k)
    blocks = []
    i = 0
    for j in range(k):
        size = base + (1 if j < extra else 0)
        blocks.append(tuple(years[i:i + size]))
        i += size
    return CvFolds(tuple(blocks))


_SEASON = {12: "DJF", 1: "DJF", 2: "DJF", 3: "MAM", 4: "MAM", 5: "MAM",
           6: "JJA", 7: "JJA", 8: "JJA", 9: "SON", 10: "SON", 11: "SON"}


def season_of(date):
    if isinstance(date, (np.ndarray, list, tuple)):
        d = np.asarray(date, dtype="datetime64[D]")
        months = d.astype("datetime64[M]").astype(int) % 12 + 1
        return np.array([_SEASON[m] for m in months])
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    elif isinstance(date, np.datetime64):
        date = date.astype("datetime64[D]").astype(object)
    return _SEASON[date.month]


def _row_masks(seasons):
    out = {"Year": np.ones(len(seasons), dtype=bool)}
    for s in ROWS[1:]:
        out[s] = np.asarray(seasons) == s
    return out


def _comparison(a_folds, b_folds, seasons, denom):
    if not (len(a_folds) == len(b_folds) == len(seasons)):
        raise DomainError("score lists must have one entry per fold")
    table = {}
    for row in ROWS:
        num = 0.0
        den = 0.0
        for k, (a, b, s) in enumerate(zip(a_folds, b_folds, seasons)):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            if a.shape != b.shape:
                raise DomainError(f"fold {k}: compared score sets differ in size")
            m = _row_masks(s)[row]
            if not m.any():
                log.warning("fold %d has no observations in %s; excluded", k, row)
                continue
            num += float(np.mean(a[m] - b[m]))
            den += float(np.mean((a if denom == "a" else b)[m]))
        table[row] = 100.0 * num / den if den != 0 else (0.0 if num == 0 else math.nan)
    return table


def crps_comparison(scores_a, scores_b, seasons):
    """``100 sum_k mean(A_k - B_k) / sum_k mean(A_k)`` per row.

    Arguments are per-fold sequences; ``seasons`` holds the season label of
    each scored observation. Negative values favour ``scores_a``.
    """
    return _comparison(scores_a, scores_b, seasons, "a")


def wcrps_comparison(scores_model, scores_gpd, seasons):
    """``100 sum_k mean(M_k - GPD_k) / sum_k mean(GPD_k)`` per row."""
    return _comparison(scores_model, scores_gpd, seasons, "b")


# ---------------------------------------------------------------------------
# cross-validation runner
# ---------------------------------------------------------------------------


@dataclass
class FoldScores:
    fold: int
    test_years: tuple
    train_years: tuple
    dates: np.ndarray
    seasons: np.ndarray
    scores: dict = field(default_factory=dict)


def _element(params, i):
    vals = {}
    for name in params.__dataclass_fields__:
        v = getattr(params, name)
        vals[name] = float(np.asarray(v).reshape(-1)[i]) if np.ndim(v) else float(v)
    return type(params)(**vals)


def score_crps(model, data: ObservationSeries):
    """CRPS of every observation in ``data`` under ``model``."""
    p = model.params_at(data.day_index(model.first_obs), data.years)
    out = np.empty(len(data))
    for i, x in enumerate(data.values):
        pi = _element(p, i)
        out[i] = crps(pi.cdf, x, quantile=pi.quantile)
    return out


def threshold_curve(train: ObservationSeries, level, basis, first_obs, sign=1.0):
    """Seasonal quantile regression of ``sign * x`` at ``level``."""
    Z = scale_design(basis, train.day_index(first_obs))
    return quantile_regression(Z, sign * train.values, level, weights=train.weights)


def score_wcrps(model, data: ObservationSeries, mu, q, tail="upper", p_mu=None):
    """wCRPS of every observation; ``mu``/``q`` are per-observation values in
    the tail's orientation (negated for the lower tail), and ``model`` is a
    full-distribution model unless ``p_mu`` is given (GPD)."""
    sign = 1.0 if tail == "upper" else -1.0
    p = model.params_at(data.day_index(model.first_obs), data.years)
    out = np.empty(len(data))
    for i, x in enumerate(sign * data.values):
        pi = _element(p, i)
        if p_mu is None:
            base = pi if sign > 0 else Negated(pi)
            cz = CensoredCdf("full", float(mu[i]), base)
        else:
            cz = CensoredCdf("gpd", float(mu[i]), pi, p_mu)
        out[i] = wcrps(cz, cz.censor(x), max(float(q[i]), cz.mu))
    return out


Fitter = Callable[[ObservationSeries], object]


def run_crps_cv(data: ObservationSeries, fitters: dict, folds: CvFolds = None):
    """Fit every model with each fold held out and score the held-out years."""
    folds = folds or make_cv_folds(data.unique_years)
    out = []
    for k, test_years in enumerate(folds):
        test = data.select_years(test_years)
        train = data.drop_years(test_years)
        fs = FoldScores(k, tuple(test_years), tuple(int(y) for y in train.unique_years),
                        test.dates, season_of(test.dates))
        for name, fit in fitters.items():
            model = fit(train)
            fs.scores[name] = score_crps(model, test)
        out.append(fs)
    return out


def run_wcrps_cv(data: ObservationSeries, model_fitters: dict, gpd_fitter, basis,
                 tail="upper", levels=None, p_mu=0.95, folds: CvFolds = None):
    """wCRPS per fold for full models and the GPD, for each level ``p_q``.

    ``gpd_fitter(train, tail, threshold_coeffs)`` returns a GPD model; the
    thresholds ``mu`` and ``q`` are quantile regressions refit on each
    training set. Lower-tail levels are given on the original scale.
    """
    levels = levels or (UPPER_LEVELS if tail == "upper" else LOWER_LEVELS)
    sign = 1.0 if tail == "upper" else -1.0
    folds = folds or make_cv_folds(data.unique_years)
    out = {lv: [] for lv in levels}
    for k, test_years in enumerate(folds):
        test = data.select_years(test_years)
        train = data.drop_years(test_years)
        fo = train.first_obs
        mu_beta = threshold_curve(train, p_mu, basis, fo, sign)
        Zt = scale_design(basis, test.day_index(fo))
        mu = Zt @ mu_beta
        full = {name: fit(train) for name, fit in model_fitters.items()}
        gpd = gpd_fitter(train, tail, LogScaleCoeffs.from_vector(mu_beta))
        for lv in levels:
            q_level = lv if sign > 0 else 1.0 - lv
            q = Zt @ threshold_curve(train, q_level, basis, fo, sign)
            fs = FoldScores(k, tuple(test_years), tuple(int(y) for y in train.unique_years),
                            test.dates, season_of(test.dates))
            for name, model in full.items():
                fs.scores[name] = score_wcrps(model, test, mu, q, tail)
            fs.scores["gpd"] = score_wcrps(gpd, test, mu, q, tail, p_mu=gpd.p_mu)
            out[lv].append(fs)
    return out


def comparison_from_folds(fold_scores, name_a, name_b, kind="crps"):
    a = [f.scores[name_a] for f in fold_scores]
    b = [f.scores[name_b] for f in fold_scores]
    s = [f.seasons for f in fold_scores]
    return crps_comparison(a, b, s) if kind == "crps" else wcrps_comparison(a, b, s)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def fold_rows(fold_scores, label="Year"):
    """``(row, fold, model, mean_score, n_obs)`` records for every row and model."""
    recs = []
    for f in fold_scores:
        masks = _row_masks(f.seasons)
        for row in ROWS:
            m = masks[row]
            if not m.any():
                continue
            for name, s in f.scores.items():
                recs.append((row if label == "Year" else f"{label}:{row}", f.fold, name,
                             float(np.mean(np.asarray(s)[m])), int(m.sum())))
    return recs


def write_fold_scores(path, records, header_lines=()):
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["row", "fold", "model", "mean_score", "n_obs"])
        for r in records:
            w.writerow([r[0], r[1], r[2], repr(r[3]), r[4]])


def write_summary(path, tables: dict, header_lines=()):
    """One line per row name; one column per table."""
    cols = list(tables)
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["row", *cols])
        for row in ROWS:
            w.writerow([row, *[repr(float(tables[c][row])) for c in cols]])
