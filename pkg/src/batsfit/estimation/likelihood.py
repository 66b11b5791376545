"""Negative log-likelihoods and gradients of the three seasonal models.

Gradients are analytic. For the BATs model the per-observation derivatives
with respect to the seven instantaneous parameters come from
``batsfit.kernels``; the chain rule to coefficients is a pair of matrix
products with the cached design rows.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .. import kernels
from ..errors import DomainError
from ..seasonal import SeasonalBatsModel, SeasonalGpdModel, SeasonalSkewNormalModel
from .series import ObservationSeries


def t_constants(nu):
    """Log normalizer of the t density and its derivative in ``nu``."""
    c = (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
         - 0.5 * math.log(nu * math.pi))
    dc = (0.5 * (special.digamma(0.5 * (nu + 1.0)) - special.digamma(0.5 * nu))
          - 0.5 / nu)
    return c, float(dc)


def _bats_local(model, data, want_grad, penalize):
    d, X = data.design(model.basis, model.covariate, model.first_obs)
    Z = X[:, :1 + model.basis.n_basis]
    nu = model.nu
    c, dc = t_constants(nu)
    ll, G, nviol = kernels.loglik_grad(
        data.values, X @ model.loc_lower.vector, X @ model.loc_upper.vector,
        Z @ model.scale_lower.vector, Z @ model.scale_upper.vector,
        float(model.kappa0), float(model.kappa1), nu, c, dc, want_grad,
        kernels.PENALTY_BASE if penalize else np.inf,
        kernels.PENALTY_QUAD if penalize else 0.0)
    return X, Z, ll, G, nviol


def bats_negloglik(model: SeasonalBatsModel, data: ObservationSeries, penalize=False):
    """Weighted negative log-likelihood.

    Returns ``inf`` if any observation falls outside its instantaneous
    support, unless ``penalize`` is set, in which case those observations
    contribute a finite barrier (used inside the optimizer).
    """
    _, _, ll, _, nviol = _bats_local(model, data, False, True)
    if nviol and not penalize:
        return math.inf
    return float(-(data.weights @ ll))


def _chain_bats(model, X, Z, G, w):
    WG = G * w[:, None]
    return -np.concatenate([
        X.T @ WG[:, 0], X.T @ WG[:, 1], Z.T @ WG[:, 2], Z.T @ WG[:, 3],
        [WG[:, 4].sum(), WG[:, 5].sum(), model.nu * WG[:, 6].sum()],
    ])


def bats_negloglik_and_gradient(model, data, penalize=True):
    X, Z, ll, G, nviol = _bats_local(model, data, True, penalize)
    f = float(-(data.weights @ ll)) if (penalize or not nviol) else math.inf
    return f, _chain_bats(model, X, Z, G, data.weights), nviol


def negloglik_gradient(model: SeasonalBatsModel, data: ObservationSeries):
    """Gradient of ``bats_negloglik`` with respect to ``model.vector``."""
    nu = model.nu
    if not (model.kappa0 / nu > -0.5 and model.kappa1 / nu > -0.5):
        raise DomainError("gradient requested on or beyond the kappa/nu > -0.5 boundary")
    _, g, nviol = bats_negloglik_and_gradient(model, data, penalize=False)
    if nviol:
        raise DomainError(f"{nviol} observation(s) fall outside the model support")
    return g


# ---------------------------------------------------------------------------
# skew-normal
# ---------------------------------------------------------------------------

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def skew_negloglik_and_gradient(model: SeasonalSkewNormalModel, data: ObservationSeries):
    _, X = data.design(model.basis, model.covariate, model.first_obs)
    Z = X[:, :1 + model.basis.n_basis]
    mu = X @ model.loc.vector
    lam = Z @ model.log_scale.vector
    alpha = Z @ model.skew.vector
    sigma = np.exp(lam)
    z = (data.values - mu) / sigma
    az = alpha * z
    lphi = special.log_ndtr(az)
    ll = math.log(2.0) - lam - 0.5 * z * z - _LOG_SQRT_2PI + lphi
    mills = np.exp(-0.5 * az * az - _LOG_SQRT_2PI - lphi)
    w = data.weights
    d_mu = (z - alpha * mills) / sigma
    d_lam = -1.0 + z * z - alpha * mills * z
    d_alpha = z * mills
    g = -np.concatenate([X.T @ (w * d_mu), Z.T @ (w * d_lam), Z.T @ (w * d_alpha)])
    return float(-(w @ ll)), g


def skew_negloglik(model, data):
    return skew_negloglik_and_gradient(model, data)[0]


# ---------------------------------------------------------------------------
# GPD
# ---------------------------------------------------------------------------


def gpd_excesses(model: SeasonalGpdModel, data: ObservationSeries):
    """Excesses over the threshold in the model's tail orientation, with the
    design rows and weights of the exceeding observations."""
    d, X = data.design(model.basis, model.covariate, model.first_obs)
    Z = X[:, :1 + model.basis.n_basis]
    x = model.sign * data.values
    mu = Z @ model.threshold.vector
    keep = x > mu
    return (x - mu)[keep], X[keep], data.weights[keep]


def _dlog_ratio(z):
    return kernels._np_dlog_ratio(np.asarray(z, dtype=float))


def gpd_negloglik_and_gradient(model: SeasonalGpdModel, data: ObservationSeries,
                               penalize=True, excess=None):
    y, X, w = excess if excess is not None else gpd_excesses(model, data)
    lam = X @ model.log_scale.vector
    xi = model.xi
    t = y * np.exp(-lam)
    zt = xi * t
    out = zt <= -1.0
    zs = np.where(out, 0.0, zt)
    l1 = np.log1p(zs)
    ratio = np.where(zs == 0.0, 1.0, l1 / np.where(zs == 0.0, 1.0, zs))
    A = t * ratio
    ll = -lam - A - l1
    d_lam = -1.0 + (1.0 + xi) * t / (1.0 + zs)
    d_xi = -t / (1.0 + zs) - t * t * _dlog_ratio(zs)
    if np.any(out):
        if not penalize:
            return math.inf, np.full(X.shape[1] + 1, np.nan)
        v = np.where(out, -(1.0 + zt), 0.0)
        ll = np.where(out, -(kernels.PENALTY_BASE + kernels.PENALTY_QUAD * v * v), ll)
        # d(-pen)/dtheta = -2 pen2 v dv/dtheta; dv/dxi = -t, dv/dlam = xi t
        d_lam = np.where(out, -2.0 * kernels.PENALTY_QUAD * v * (xi * t), d_lam)
        d_xi = np.where(out, 2.0 * kernels.PENALTY_QUAD * v * t, d_xi)
    g = -np.concatenate([X.T @ (w * d_lam), [w @ d_xi]])
    return float(-(w @ ll)), g


def gpd_negloglik(model, data):
    return gpd_negloglik_and_gradient(model, data, penalize=False)[0]

