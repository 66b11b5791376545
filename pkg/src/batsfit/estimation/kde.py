"""Gaussian kernel density estimates pooled over a window of days."""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.optimize import brentq

from ..covariates import YEAR_DAYS
from ..errors import DomainError

log = logging.getLogger(__name__)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def silverman_bandwidth(x):
    x = np.asarray(x, dtype=float)
    sd = x.std(ddof=1) if x.size > 1 else 0.0
    return 1.06 * sd * x.size ** (-0.2)


def _psi(x, h, order):
    # density functional estimate sum_ij phi^(order)((xi - xj)/h) / (n (n-1) h^(order+1))
    n = x.size
    u = (x[:, None] - x[None, :]) / h
    u2 = u * u
    g = np.exp(-0.5 * u2) / _SQRT_2PI
    if order == 4:
        poly = u2 * u2 - 6.0 * u2 + 3.0
    else:
        poly = u2 * u2 * u2 - 15.0 * u2 * u2 + 45.0 * u2 - 15.0
    return float((poly * g).sum() / (n * (n - 1) * h ** (order + 1)))


def sheather_jones_bandwidth(x):
    """Solve-the-equation plug-in bandwidth with a Gaussian kernel."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 3:
        raise DomainError("plug-in bandwidth needs at least 3 points")
    q75, q25 = np.percentile(x, [75, 25])
    scale = min(x.std(ddof=1), (q75 - q25) / 1.349)
    if not scale > 0:
        scale = x.std(ddof=1)
    if not scale > 0:
        raise DomainError("degenerate sample: zero spread")
    a = 1.241 * scale * n ** (-1.0 / 7.0)
    b = 1.230 * scale * n ** (-1.0 / 9.0)
    c1 = 1.0 / (2.0 * math.sqrt(math.pi) * n)
    td = -_psi(x, b, 6)
    sda = _psi(x, a, 4)
    if not (td > 0 and sda > 0):
        raise DomainError("plug-in functionals are not positive")
    alph2 = 1.357 * (sda / td) ** (1.0 / 7.0)

    def fsd(h):
        return (c1 / _psi(x, alph2 * h ** (5.0 / 7.0), 4)) ** 0.2 - h

    hmax = 1.144 * scale * n ** (-0.2)
    lo, hi = 0.1 * hmax, hmax
    for _ in range(20):
        if fsd(lo) * fsd(hi) < 0:
            break
        lo, hi = lo * 0.5, hi * 2.0
    else:
        raise DomainError("no sign change for the plug-in bandwidth equation")
    return brentq(fsd, lo, hi, xtol=1e-10 * hmax)


def select_bandwidth(x):
    """Plug-in bandwidth, falling back to the 1.06 sd n^-1/5 rule."""
    try:
        return sheather_jones_bandwidth(x), "sheather-jones"
    except (DomainError, ValueError, FloatingPointError) as exc:
        log.warning("plug-in bandwidth failed (%s); using normal reference rule", exc)
        return silverman_bandwidth(x), "normal-reference"


def window_pool(data, day, half_window=7, first_obs=None):
    """Values whose day index is within ``half_window`` days of ``day``
    (circularly), over all years."""
    d = data.day_index(first_obs)
    # signed circular offset; the half-open interval of length 2 half_window + 1
    # holds exactly that many consecutive days of each year
    off = np.mod(d - day + 0.5 * YEAR_DAYS, YEAR_DAYS) - 0.5 * YEAR_DAYS
    return data.values[(off >= -half_window - 0.5) & (off < half_window + 0.5)]


def gaussian_kde(pool, eval_points, bandwidth):
    x = np.asarray(eval_points, dtype=float)
    u = (x[..., None] - np.asarray(pool)[None, :]) / bandwidth
    return np.exp(-0.5 * u * u).mean(axis=-1) / (bandwidth * _SQRT_2PI)


def windowed_kde(data, day, eval_points, half_window=7, bandwidth=None,
                 first_obs=None, return_info=False):
    """Density of the values pooled in a (2 half_window + 1)-day window.

    With ``return_info`` the bandwidth, its selection method and the pool
    size are returned alongside the density.
    """
    pool = window_pool(data, day, half_window, first_obs)
    if pool.size == 0:
        raise DomainError(f"no observations within {half_window} days of day {day}")
    method = "user"
    if bandwidth is None:
        if pool.size >= 3 and np.ptp(pool) > 0:
            bandwidth, method = select_bandwidth(pool)
        else:
            raise DomainError("too few distinct observations to select a bandwidth")
    dens = gaussian_kde(pool, eval_points, bandwidth)
    if return_info:
        return dens, {"bandwidth": float(bandwidth), "method": method, "n": int(pool.size)}
    return dens
