"""Seasonal models: coefficient blocks mapped to instantaneous parameters.

For each tail of the BATs model the location at day ``d`` of year ``y`` is::

    phi(d, y) = a0 + sum_j a_j S_j(d) + C(y) (b1 + b2 cos(w d) + b3 sin(w d))

and the log scale is ``g0 + sum_j g_j S_j(d)``, with ``w = 2 pi / 365.25`` and
``C`` the yearly covariate. The shapes and the degrees of freedom are
constant. That gives 12 + 12 location, 9 + 9 log-scale, 2 shape and 1 dof
coefficients: 45 in total.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .covariates import PeriodicSplineBasis, YearlyCovariate, harmonic_pair
from .distributions import BatsParams, GpdParams, SkewNormalParams
from .errors import ConfigError, ParseError

FORMAT_VERSION = 1
N_LOC = 12
N_SCALE = 9
N_BATS = 2 * N_LOC + 2 * N_SCALE + 3


def location_design(basis, d, cov_values):
    """Rows ``[1, S_1..S_n, C, C cos, C sin]``."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    c = np.broadcast_to(np.asarray(cov_values, dtype=float), d.shape)
    cs, sn = harmonic_pair(d, basis.period)
    return np.column_stack([np.ones_like(d), basis(d), c, c * cs, c * sn])


def scale_design(basis, d):
    """Rows ``[1, S_1..S_n]``."""
    d = np.atleast_1d(np.asarray(d, dtype=float))
    return np.column_stack([np.ones_like(d), basis(d)])


@dataclass(frozen=True)
class LocationCoeffs:
    intercept: float = 0.0
    spline: tuple = (0.0,) * 8
    trend: float = 0.0
    trend_cos: float = 0.0
    trend_sin: float = 0.0

    @property
    def vector(self):
        return np.array([self.intercept, *self.spline, self.trend,
                         self.trend_cos, self.trend_sin], dtype=float)

    @classmethod
    def from_vector(cls, v):
        v = [float(a) for a in v]
        return cls(v[0], tuple(v[1:-3]), v[-3], v[-2], v[-1])

    def to_dict(self):
        return {"intercept": self.intercept, "spline": list(self.spline),
                "trend": self.trend, "trend_cos": self.trend_cos,
                "trend_sin": self.trend_sin}

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["intercept"]), tuple(float(a) for a in doc["spline"]),
                   float(doc["trend"]), float(doc["trend_cos"]), float(doc["trend_sin"]))


@dataclass(frozen=True)
class LogScaleCoeffs:
    intercept: float = 0.0
    spline: tuple = (0.0,) * 8

    @property
    def vector(self):
        return np.array([self.intercept, *self.spline], dtype=float)

    @classmethod
    def from_vector(cls, v):
        v = [float(a) for a in v]
        return cls(v[0], tuple(v[1:]))

    def to_dict(self):
        return {"intercept": self.intercept, "spline": list(self.spline)}

    @classmethod
    def from_dict(cls, doc):
        return cls(float(doc["intercept"]), tuple(float(a) for a in doc["spline"]))


@dataclass(frozen=True)
class DayIndex:
    d: float
    y: int


def _dy(d, year):
    if isinstance(d, DayIndex):
        d, year = d.d, d.y
    d = np.asarray(d, dtype=float)
    year = np.asarray(year, dtype=np.int64)
    d, year = np.broadcast_arrays(d, year)
    return d, year


def _squeeze(a, shape):
    a = np.asarray(a).reshape(shape)
    return float(a) if a.ndim == 0 else a


class _SeasonalBase:
    kind = ""

    def _designs(self, d, year):
        d, year = _dy(d, year)
        shape = d.shape
        c = self.covariate(year.ravel())
        return shape, d.ravel(), location_design(self.basis, d.ravel(), c)

    def save(self, path):
        write_model(self, path)


@dataclass(frozen=True)
class SeasonalBatsModel(_SeasonalBase):
    loc_lower: LocationCoeffs
    loc_upper: LocationCoeffs
    scale_lower: LogScaleCoeffs
    scale_upper: LogScaleCoeffs
    kappa0: float
    kappa1: float
    log_nu: float
    basis: PeriodicSplineBasis
    covariate: YearlyCovariate
    first_obs: dt.date
    metadata: dict = field(default_factory=dict, compare=False)

    kind = "bats"

    @property
    def nu(self):
        return float(np.exp(self.log_nu))

    @property
    def n_params(self):
        return self.vector.size

    @property
    def vector(self):
        """Coefficients in the order lower loc, upper loc, lower log-scale,
        upper log-scale, kappa0, kappa1, log nu."""
        return np.concatenate([self.loc_lower.vector, self.loc_upper.vector,
                               self.scale_lower.vector, self.scale_upper.vector,
                               [self.kappa0, self.kappa1, self.log_nu]])

    def with_vector(self, v, **meta):
        v = np.asarray(v, dtype=float)
        nl = self.loc_lower.vector.size
        ns = self.scale_lower.vector.size
        i = np.cumsum([0, nl, nl, ns, ns])
        return replace(
            self,
            loc_lower=LocationCoeffs.from_vector(v[i[0]:i[1]]),
            loc_upper=LocationCoeffs.from_vector(v[i[1]:i[2]]),
            scale_lower=LogScaleCoeffs.from_vector(v[i[2]:i[3]]),
            scale_upper=LogScaleCoeffs.from_vector(v[i[3]:i[4]]),
            kappa0=float(v[i[4]]), kappa1=float(v[i[4] + 1]),
            log_nu=float(v[i[4] + 2]),
            metadata={**self.metadata, **meta},
        )

    def params_at(self, d, year=None) -> BatsParams:
        """Instantaneous parameters at day ``d`` (or a DayIndex) of ``year``."""
        shape, dd, X = self._designs(d, year)
        Z = X[:, :1 + self.basis.n_basis]
        return BatsParams(
            nu=self.nu,
            phi0=_squeeze(X @ self.loc_lower.vector, shape),
            phi1=_squeeze(X @ self.loc_upper.vector, shape),
            tau0=_squeeze(np.exp(Z @ self.scale_lower.vector), shape),
            tau1=_squeeze(np.exp(Z @ self.scale_upper.vector), shape),
            kappa0=self.kappa0,
            kappa1=self.kappa1,
        )

    distribution_at = params_at

    def coefficients_dict(self):
        return {
            "loc_lower": self.loc_lower.to_dict(),
            "loc_upper": self.loc_upper.to_dict(),
            "scale_lower": self.scale_lower.to_dict(),
            "scale_upper": self.scale_upper.to_dict(),
            "kappa0": self.kappa0,
            "kappa1": self.kappa1,
            "log_nu": self.log_nu,
        }

    @classmethod
    def from_coefficients(cls, doc, basis, covariate, first_obs, metadata):
        return cls(LocationCoeffs.from_dict(doc["loc_lower"]),
                   LocationCoeffs.from_dict(doc["loc_upper"]),
                   LogScaleCoeffs.from_dict(doc["scale_lower"]),
                   LogScaleCoeffs.from_dict(doc["scale_upper"]),
                   float(doc["kappa0"]), float(doc["kappa1"]), float(doc["log_nu"]),
                   basis, covariate, first_obs, metadata)


@dataclass(frozen=True)
class SeasonalSkewNormalModel(_SeasonalBase):
    loc: LocationCoeffs
    log_scale: LogScaleCoeffs
    skew: LogScaleCoeffs
    basis: PeriodicSplineBasis
    covariate: YearlyCovariate
    first_obs: dt.date
    metadata: dict = field(default_factory=dict, compare=False)

    kind = "skew"

    @property
    def vector(self):
        return np.concatenate([self.loc.vector, self.log_scale.vector, self.skew.vector])

    def with_vector(self, v, **meta):
        v = np.asarray(v, dtype=float)
        nl, ns = self.loc.vector.size, self.log_scale.vector.size
        return replace(self, loc=LocationCoeffs.from_vector(v[:nl]),
                       log_scale=LogScaleCoeffs.from_vector(v[nl:nl + ns]),
                       skew=LogScaleCoeffs.from_vector(v[nl + ns:]),
                       metadata={**self.metadata, **meta})

    def params_at(self, d, year=None) -> SkewNormalParams:
        shape, dd, X = self._designs(d, year)
        Z = scale_design(self.basis, dd)
        return SkewNormalParams(
            mu=_squeeze(X @ self.loc.vector, shape),
            sigma=_squeeze(np.exp(Z @ self.log_scale.vector), shape),
            alpha=_squeeze(Z @ self.skew.vector, shape),
        )

    skew_params_at = params_at
    distribution_at = params_at

    def coefficients_dict(self):
        return {"loc": self.loc.to_dict(), "log_scale": self.log_scale.to_dict(),
                "skew": self.skew.to_dict()}

    @classmethod
    def from_coefficients(cls, doc, basis, covariate, first_obs, metadata):
        return cls(LocationCoeffs.from_dict(doc["loc"]),
                   LogScaleCoeffs.from_dict(doc["log_scale"]),
                   LogScaleCoeffs.from_dict(doc["skew"]),
                   basis, covariate, first_obs, metadata)


@dataclass(frozen=True)
class SeasonalGpdModel(_SeasonalBase):
    """Threshold-exceedance model for one tail.

    Parameters describe the upper tail of ``sign * x`` where ``sign`` is -1
    for a lower-tail model; ``params_at`` therefore returns a GPD for the
    negated data when ``tail == "lower"``.
    """

    threshold: LogScaleCoeffs
    log_scale: LocationCoeffs
    xi: float
    tail: str
    p_mu: float
    basis: PeriodicSplineBasis
    covariate: YearlyCovariate
    first_obs: dt.date
    metadata: dict = field(default_factory=dict, compare=False)

    kind = "gpd"

    def __post_init__(self):
        if self.tail not in ("upper", "lower"):
            raise ConfigError("tail must be 'upper' or 'lower'")

    @property
    def sign(self):
        return 1.0 if self.tail == "upper" else -1.0

    @property
    def vector(self):
        """Free coefficients (log scale then shape); the threshold is fixed."""
        return np.concatenate([self.log_scale.vector, [self.xi]])

    def with_vector(self, v, **meta):
        v = np.asarray(v, dtype=float)
        return replace(self, log_scale=LocationCoeffs.from_vector(v[:-1]),
                       xi=float(v[-1]), metadata={**self.metadata, **meta})

    def threshold_at(self, d):
        d = np.asarray(d, dtype=float)
        out = scale_design(self.basis, d.ravel()) @ self.threshold.vector
        return _squeeze(out, d.shape)

    def params_at(self, d, year=None) -> GpdParams:
        shape, dd, X = self._designs(d, year)
        Z = scale_design(self.basis, dd)
        return GpdParams(
            mu=_squeeze(Z @ self.threshold.vector, shape),
            sigma=_squeeze(np.exp(X @ self.log_scale.vector), shape),
            xi=self.xi,
        )

    gpd_params_at = params_at
    distribution_at = params_at

    def coefficients_dict(self):
        return {"threshold": self.threshold.to_dict(),
                "log_scale": self.log_scale.to_dict(), "xi": self.xi,
                "tail": self.tail, "p_mu": self.p_mu}

    @classmethod
    def from_coefficients(cls, doc, basis, covariate, first_obs, metadata):
        return cls(LogScaleCoeffs.from_dict(doc["threshold"]),
                   LocationCoeffs.from_dict(doc["log_scale"]),
                   float(doc["xi"]), str(doc["tail"]), float(doc["p_mu"]),
                   basis, covariate, first_obs, metadata)


def params_at(model: SeasonalBatsModel, idx: DayIndex) -> BatsParams:
    return model.params_at(idx)


def skew_params_at(model: SeasonalSkewNormalModel, idx: DayIndex) -> SkewNormalParams:
    return model.params_at(idx)


def gpd_params_at(model: SeasonalGpdModel, idx: DayIndex) -> GpdParams:
    return model.params_at(idx)


# ---------------------------------------------------------------------------
# quantile queries
# ---------------------------------------------------------------------------

DAY_GRID = np.arange(365, dtype=float)

SPREADS = (
    ("q0.99-q0.95", 0.99, 0.95),
    ("q0.95-q0.75", 0.95, 0.75),
    ("q0.75-q0.25", 0.75, 0.25),
    ("q0.25-q0.05", 0.25, 0.05),
    ("q0.05-q0.01", 0.05, 0.01),
)


def quantile_curve(model, q, year, days=DAY_GRID):
    """Quantile at level ``q`` on each day of the grid (default 0..364)."""
    return np.asarray(model.params_at(days, np.full(len(days), year)).quantile(q))


def quantile_change(model, q, year0, year1, reference="median", days=DAY_GRID):
    """Change in the ``q`` quantile between two years.

    ``reference="median"`` subtracts the median curve of ``year0``;
    ``reference="same"`` subtracts the ``q`` curve of ``year0``.
    """
    if reference == "median":
        base = quantile_curve(model, 0.5, year0, days)
    elif reference == "same":
        base = quantile_curve(model, q, year0, days)
    else:
        raise ConfigError("reference must be 'median' or 'same'")
    return quantile_curve(model, q, year1, days) - base


def quantile_spreads(model, year, days=DAY_GRID):
    """Five tail/bulk quantile spreads per day and their annual means.

    Returns ``(daily, means)``: dicts keyed by spread name.
    """
    levels = sorted({q for _, a, b in SPREADS for q in (a, b)})
    curves = {q: quantile_curve(model, q, year, days) for q in levels}
    daily = {name: curves[a] - curves[b] for name, a, b in SPREADS}
    means = {name: float(np.mean(v)) for name, v in daily.items()}
    return daily, means


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

_KINDS = {"bats": SeasonalBatsModel, "skew": SeasonalSkewNormalModel,
          "gpd": SeasonalGpdModel}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (dt.date, np.datetime64)):
        return str(obj)
    return obj


def model_to_dict(model):
    meta = dict(model.metadata)
    meta.setdefault("tool_version", __version__)
    return {
        "format_version": FORMAT_VERSION,
        "model_type": model.kind,
        "first_obs": str(model.first_obs),
        "basis": model.basis.to_dict(),
        "covariate": model.covariate.to_dict(),
        "coefficients": model.coefficients_dict(),
        "metadata": _jsonable(meta),
    }


def model_from_dict(doc):
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise ParseError(f"unsupported model format_version {version!r}")
        cls = _KINDS[doc["model_type"]]
        basis = PeriodicSplineBasis.from_dict(doc["basis"])
        cov = YearlyCovariate.from_dict(doc["covariate"])
        first = dt.date.fromisoformat(doc["first_obs"])
        return cls.from_coefficients(doc["coefficients"], basis, cov, first,
                                     dict(doc.get("metadata", {})))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed model document: {exc!r}") from None


def dumps_model(model):
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def loads_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model document is not valid JSON: {exc}") from None
    return model_from_dict(doc)


def write_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def read_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
