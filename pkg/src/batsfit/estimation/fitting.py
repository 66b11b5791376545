"""Maximum-likelihood fitting of the seasonal BATs, skew-normal and GPD models.

All three fits share one optimizer setup. Linear coefficient blocks are
preconditioned with the SVD of their (weighted) design so that a unit step in
the optimizer's coordinates moves every fitted curve by about one unit; this
removes the near-collinearity between the intercept and the slowly varying
covariate terms. The objective handed to L-BFGS is the mean negative
log-likelihood per unit weight.

For the BATs model the shape constraint ``kappa_i / nu > -0.5`` is removed by
reparameterization::

    kappa_i = (nu / 2) * (softplus(theta_i + c) - 1 + margin)

with ``c`` chosen so that ``theta_i = 0`` gives ``kappa_i = 0``; then
``kappa_i / nu > -0.5 + margin / 2`` for every real ``theta_i``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..covariates import PeriodicSplineBasis
from ..distributions import softplus_inverse
from ..errors import InsufficientDataError
from ..seasonal import (
    LocationCoeffs,
    LogScaleCoeffs,
    SeasonalBatsModel,
    SeasonalGpdModel,
    SeasonalSkewNormalModel,
    scale_design,
)
from .likelihood import (
    bats_negloglik,
    bats_negloglik_and_gradient,
    gpd_excesses,
    gpd_negloglik_and_gradient,
    skew_negloglik_and_gradient,
)
from .quantreg import quantile_regression
from .series import ObservationSeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 3000
    gradient_tolerance: float = 1e-6
    scale_intercept_grid: tuple = (-1.0, 0.0, 1.0, 2.0)
    constraint_margin: float = 1e-3
    rng_seed: int = 0
    nu_init: float = 10.0
    min_exceedances: int = 50

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if not (self.gradient_tolerance > 0 and self.constraint_margin > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class FitResult:
    """Outcome of one maximum-likelihood fit.

    ``gradient_norm`` is the max-abs gradient of the mean negative
    log-likelihood in the optimizer's (preconditioned) coordinates, the
    quantity compared against ``FitConfig.gradient_tolerance``.
    """

    model: object
    neg_loglik: float
    converged: bool
    iterations: int
    gradient_norm: float
    init_used: np.ndarray
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    def summary(self):
        return {"neg_loglik": self.neg_loglik, "converged": self.converged,
                "iterations": self.iterations, "gradient_norm": self.gradient_norm,
                "message": self.message, **self.diagnostics}


# ---------------------------------------------------------------------------
# shared machinery
# ---------------------------------------------------------------------------


def _block_preconditioner(design, weights):
    """Columns mapping optimizer coordinates to coefficients of one block."""
    sw = np.sqrt(weights / weights.sum())[:, None]
    _, s, vt = np.linalg.svd(design * sw, full_matrices=False)
    keep = s > 1e-10 * s[0]
    return vt[keep].T / s[keep]


def _preconditioner(blocks, weights):
    """Block-diagonal map; ``None`` entries are scalars passed through."""
    cols = []
    sizes = []
    for b in blocks:
        if b is None:
            cols.append(np.ones((1, 1)))
            sizes.append(1)
        else:
            P = _block_preconditioner(b, weights)
            cols.append(P)
            sizes.append(b.shape[1])
    n_rows = sum(sizes)
    n_cols = sum(c.shape[1] for c in cols)
    P = np.zeros((n_rows, n_cols))
    r = c = 0
    for blk in cols:
        P[r:r + blk.shape[0], c:c + blk.shape[1]] = blk
        r += blk.shape[0]
        c += blk.shape[1]
    return P


def _run(objective, y0, P, scale, config):
    """Minimize ``objective(y) -> (f, grad_y)`` over ``y = y0 + P z``."""

    def fz(z):
        f, g = objective(y0 + P @ z)
        return f / scale, (P.T @ g) / scale

    z0 = np.zeros(P.shape[1])
    f0, _ = fz(z0)
    res = minimize(fz, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": config.max_iterations,
                            "gtol": config.gradient_tolerance,
                            "ftol": 1e-15, "maxls": 60, "maxcor": 20})
    z = res.x
    f, g = fz(z)
    if not (f <= f0):
        z, (f, g) = z0, (f0, fz(z0)[1])
    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    return y0 + P @ z, f * scale, gnorm, int(res.nit), str(res.message), f0 * scale


# ---------------------------------------------------------------------------
# BATs
# ---------------------------------------------------------------------------


class _ShapeMap:
    """kappa_i = (nu / 2) * (softplus(theta_i + c) - 1 + margin)."""

    def __init__(self, margin):
        self.margin = margin
        self.c = float(softplus_inverse(1.0 - margin))

    def ratio(self, theta):
        return np.logaddexp(0.0, theta + self.c) - 1.0 + self.margin

    def dratio(self, theta):
        return 1.0 / (1.0 + np.exp(-(theta + self.c)))

    def theta(self, ratio):
        # inverse of ratio(); ratios at or below the floor are clipped just above it
        r = max(ratio, -1.0 + self.margin + 1e-12) + 1.0 - self.margin
        return float(softplus_inverse(r)) - self.c


def _bats_split(model):
    v = model.vector
    return v[:-3], v[-3], v[-2], v[-1]


def initial_bats_model(data: ObservationSeries, basis=None, covariate=None,
                       scale_intercept=0.0, nu_init=10.0):
    """Starting point: OLS seasonal location shifted by -/+ one residual sd,
    flat log scales at ``scale_intercept``, zero shapes and trends."""
    basis = basis or PeriodicSplineBasis()
    covariate = covariate or data.covariate
    frame = SeasonalBatsModel(LocationCoeffs(spline=(0.0,) * basis.n_basis),
                              LocationCoeffs(spline=(0.0,) * basis.n_basis),
                              LogScaleCoeffs(spline=(0.0,) * basis.n_basis),
                              LogScaleCoeffs(spline=(0.0,) * basis.n_basis),
                              0.0, 0.0, math.log(nu_init), basis, covariate,
                              data.first_obs)
    _, X = data.design(basis, covariate, data.first_obs)
    Z = X[:, :1 + basis.n_basis]
    sw = np.sqrt(data.weights)
    coef, *_ = np.linalg.lstsq(Z * sw[:, None], data.values * sw, rcond=None)
    resid = data.values - Z @ coef
    dof = max(data.total_weight - Z.shape[1], 1.0)
    sd = math.sqrt(float(data.weights @ (resid * resid)) / dof)
    loc = np.concatenate([coef, np.zeros(3)])
    lo = loc.copy()
    hi = loc.copy()
    lo[0] -= sd
    hi[0] += sd
    sc = np.zeros(1 + basis.n_basis)
    sc[0] = scale_intercept
    v = np.concatenate([lo, hi, sc, sc, [0.0, 0.0, math.log(nu_init)]])
    return frame.with_vector(v)


def _fit_bats_from(init: SeasonalBatsModel, data, config):
    shapes = _ShapeMap(config.constraint_margin)
    lin, k0, k1, lnu = _bats_split(init)
    nu = math.exp(lnu)
    y0 = np.concatenate([lin, [shapes.theta(2 * k0 / nu), shapes.theta(2 * k1 / nu), lnu]])
    _, X = data.design(init.basis, init.covariate, init.first_obs)
    Z = X[:, :1 + init.basis.n_basis]
    P = _preconditioner([X, X, Z, Z, None, None, None], data.weights)

    def natural(y):
        nu = math.exp(y[-1])
        r = shapes.ratio(y[-3:-1])
        return np.concatenate([y[:-3], 0.5 * nu * r, [y[-1]]]), nu, r

    def objective(y):
        v, nu, _ = natural(y)
        f, g, _ = bats_negloglik_and_gradient(init.with_vector(v), data, penalize=True)
        gy = g.copy()
        dr = shapes.dratio(y[-3:-1])
        gy[-3:-1] = g[-3:-1] * 0.5 * nu * dr
        gy[-1] = g[-1] + g[-3] * v[-3] + g[-2] * v[-2]
        return f, gy

    y, f_pen, gnorm, nit, msg, f_start = _run(objective, y0, P, data.total_weight, config)
    v, nu, r = natural(y)
    model = init.with_vector(v)
    nll = bats_negloglik(model, data)
    ratios = (model.kappa0 / nu, model.kappa1 / nu)
    feasible = all(x > -0.5 for x in ratios)
    converged = bool(gnorm <= config.gradient_tolerance and feasible and math.isfinite(nll))
    diag = {
        "kappa_over_nu": list(ratios),
        "boundary_distance": [x + 0.5 for x in ratios],
        "start_neg_loglik": f_start,
    }
    return FitResult(model, nll, converged, nit, gnorm, init.vector, msg, diag)


def fit_bats(data: ObservationSeries, config: FitConfig = None, init=None,
             basis=None, covariate=None) -> FitResult:
    """Constrained maximum-likelihood fit of the seasonal BATs model.

    Without ``init`` every value of ``config.scale_intercept_grid`` seeds one
    local optimization and the best result is returned; with ``init`` (such
    as a full-data optimum for a bootstrap replicate) a single optimization
    starts there.
    """
    config = config or FitConfig()
    years = data.unique_years
    if years.size < 2 or len(data) < 2 * 365 * 0.5:
        raise InsufficientDataError("fitting needs at least two years of daily data")
    if init is not None:
        res = _fit_bats_from(init, data, config)
        res.diagnostics["profile"] = []
        return res
    best = None
    profile = []
    for g in config.scale_intercept_grid:
        start = initial_bats_model(data, basis, covariate, g, config.nu_init)
        res = _fit_bats_from(start, data, config)
        profile.append({"scale_intercept": g, "neg_loglik": res.neg_loglik,
                        "converged": res.converged,
                        "start_neg_loglik": res.diagnostics["start_neg_loglik"]})
        log.info("profile start %.2f: nll=%.6f converged=%s", g, res.neg_loglik, res.converged)
        if best is None or res.neg_loglik < best.neg_loglik:
            best = res
    best.diagnostics["profile"] = profile
    best.model = best.model.with_vector(best.model.vector, fit=best.summary())
    return best


# ---------------------------------------------------------------------------
# skew-normal
# ---------------------------------------------------------------------------


def fit_skew_normal(data: ObservationSeries, config: FitConfig = None, init=None,
                    basis=None, covariate=None) -> FitResult:
    config = config or FitConfig()
    basis = basis or (init.basis if init is not None else PeriodicSplineBasis())
    covariate = covariate or (init.covariate if init is not None else data.covariate)
    nb = basis.n_basis
    if init is None:
        _, X = data.design(basis, covariate, data.first_obs)
        Z = X[:, :1 + nb]
        sw = np.sqrt(data.weights)
        coef, *_ = np.linalg.lstsq(Z * sw[:, None], data.values * sw, rcond=None)
        resid = data.values - Z @ coef
        sd = math.sqrt(float(data.weights @ (resid * resid)) / data.total_weight)
        init = SeasonalSkewNormalModel(
            LocationCoeffs.from_vector(np.concatenate([coef, np.zeros(3)])),
            LogScaleCoeffs(math.log(sd), (0.0,) * nb),
            LogScaleCoeffs(0.0, (0.0,) * nb),
            basis, covariate, data.first_obs)
    _, X = data.design(init.basis, init.covariate, init.first_obs)
    Z = X[:, :1 + nb]
    P = _preconditioner([X, Z, Z], data.weights)

    def objective(y):
        return skew_negloglik_and_gradient(init.with_vector(y), data)

    y, f, gnorm, nit, msg, f0 = _run(objective, init.vector, P, data.total_weight, config)
    model = init.with_vector(y)
    res = FitResult(model, f, bool(gnorm <= config.gradient_tolerance and math.isfinite(f)),
                    nit, gnorm, init.vector, msg, {"start_neg_loglik": f0})
    res.model = model.with_vector(y, fit=res.summary())
    return res


# ---------------------------------------------------------------------------
# GPD
# ---------------------------------------------------------------------------


def fit_threshold(data: ObservationSeries, p, basis=None, first_obs=None, sign=1.0):
    """Seasonal quantile-regression curve (intercept + splines) at level ``p``
    for ``sign * values``."""
    basis = basis or PeriodicSplineBasis()
    d = data.day_index(first_obs or data.first_obs)
    Z = scale_design(basis, d)
    beta = quantile_regression(Z, sign * data.values, p, weights=data.weights)
    return LogScaleCoeffs.from_vector(beta)


def fit_gpd(data: ObservationSeries, tail="upper", p_mu=0.95, config: FitConfig = None,
            init=None, basis=None, covariate=None, threshold=None) -> FitResult:
    """Peaks-over-threshold fit with a seasonal quantile-regression threshold.

    The lower tail is handled by negating the data. ``threshold`` may carry
    precomputed threshold coefficients; otherwise they are estimated here.
    """
    config = config or FitConfig()
    basis = basis or (init.basis if init is not None else PeriodicSplineBasis())
    covariate = covariate or (init.covariate if init is not None else data.covariate)
    sign = 1.0 if tail == "upper" else -1.0
    if init is None:
        if threshold is None:
            threshold = fit_threshold(data, p_mu, basis, data.first_obs, sign)
        nb = basis.n_basis
        frame = SeasonalGpdModel(threshold, LocationCoeffs(spline=(0.0,) * nb), 0.0,
                                 tail, p_mu, basis, covariate, data.first_obs)
        y, _, w = gpd_excesses(frame, data)
        if w.sum() < config.min_exceedances:
            raise InsufficientDataError(
                f"only {int(w.sum())} exceedances; need {config.min_exceedances}")
        mean_excess = float(w @ y / w.sum())
        v = np.zeros(frame.vector.size)
        v[0] = math.log(mean_excess)
        init = frame.with_vector(v)
    excess = gpd_excesses(init, data)
    y, X, w = excess
    if w.sum() < config.min_exceedances:
        raise InsufficientDataError(
            f"only {int(w.sum())} exceedances; need {config.min_exceedances}")
    P = _preconditioner([X, None], w)

    def objective(vec):
        return gpd_negloglik_and_gradient(init.with_vector(vec), data, True, excess)

    vec, f, gnorm, nit, msg, f0 = _run(objective, init.vector, P, float(w.sum()), config)
    model = init.with_vector(vec)
    f_exact = gpd_negloglik_and_gradient(model, data, False, excess)[0]
    res = FitResult(model, f_exact,
                    bool(gnorm <= config.gradient_tolerance and math.isfinite(f_exact)),
                    nit, gnorm, init.vector, msg,
                    {"start_neg_loglik": f0, "n_exceedances": int(w.sum())})
    res.model = model.with_vector(vec, fit=res.summary())
    return res
