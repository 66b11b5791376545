"""Densities, cdfs, quantiles and supports at fixed parameter values.

Covers the bulk-and-tails (BATs) family, the Student-t base distribution,
the skew-normal and the generalized Pareto distribution. All functions are
vectorized: parameter fields may be numpy arrays that broadcast against the
evaluation points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import special

from . import kernels
from .errors import DomainError, NumericalError

LOG2 = math.log(2.0)


# ---------------------------------------------------------------------------
# softplus
# ---------------------------------------------------------------------------


def softplus(x):
    """``log(1 + e^x)`` without overflow."""
    out = np.logaddexp(0.0, np.asarray(x, dtype=float))
    return out if out.ndim else float(out)


def softplus_inverse(y):
    """``log(e^y - 1)`` for ``y > 0``."""
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("softplus_inverse requires y > 0")
    out = kernels._np_spinv(y)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Student-t
# ---------------------------------------------------------------------------


def _check_nu(nu):
    nu = np.asarray(nu, dtype=float)
    if np.any(~(nu > 0)) or np.any(~np.isfinite(nu)):
        raise DomainError("Student-t degrees of freedom must be positive and finite")
    return nu


def _scalar(a):
    return float(a) if np.ndim(a) == 0 else a


def student_t_logpdf(nu, t):
    nu = _check_nu(nu)
    t = np.asarray(t, dtype=float)
    c = (special.gammaln(0.5 * (nu + 1.0)) - special.gammaln(0.5 * nu)
         - 0.5 * np.log(nu * np.pi))
    return _scalar(c - 0.5 * (nu + 1.0) * np.log1p(t * t / nu))


def student_t_pdf(nu, t):
    return _scalar(np.exp(student_t_logpdf(nu, t)))


def _t_tail(nu, t):
    # P(T > |t|), via whichever incomplete-beta form is better conditioned
    t2 = t * t
    with np.errstate(over="ignore", invalid="ignore"):
        far = t2 >= nu
        x_far = nu / (nu + t2)
        x_near = t2 / (nu + t2)
        out = np.where(
            far,
            0.5 * special.betainc(0.5 * nu, 0.5, np.where(far, x_far, 1.0)),
            0.5 - 0.5 * special.betainc(0.5, 0.5 * nu, np.where(far, 0.0, x_near)),
        )
    return np.where(np.isinf(t), 0.0, out)


def student_t_cdf(nu, t):
    nu = _check_nu(nu)
    t = np.asarray(t, dtype=float)
    tail = _t_tail(nu, t)
    return _scalar(np.where(t > 0, 1.0 - tail, tail))


def student_t_sf(nu, t):
    nu = _check_nu(nu)
    t = np.asarray(t, dtype=float)
    tail = _t_tail(nu, t)
    return _scalar(np.where(t > 0, tail, 1.0 - tail))


def student_t_quantile(nu, q):
    nu = _check_nu(nu)
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile level must lie in (0, 1)")
    p = np.minimum(q, 1.0 - q)
    # tails: I_x(nu/2, 1/2) = 2p with x = nu / (nu + t^2)
    x = special.betaincinv(0.5 * nu, 0.5, 2.0 * p)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_far = np.sqrt(nu * (1.0 - x) / x)
        # centre: I_y(1/2, nu/2) = 1 - 2p with y = t^2 / (nu + t^2)
        y = special.betaincinv(0.5, 0.5 * nu, 1.0 - 2.0 * p)
        t_near = np.sqrt(nu * y / (1.0 - y))
    t = np.where(p < 0.25, t_far, t_near)
    return _scalar(np.where(q < 0.5, -t, t))


# ---------------------------------------------------------------------------
# BATs
# ---------------------------------------------------------------------------


class Support(NamedTuple):
    lower: float
    upper: float


@dataclass(frozen=True)
class BatsParams:
    """Instantaneous BATs parameters; fields may be broadcastable arrays."""

    nu: float
    phi0: float
    phi1: float
    tau0: float
    tau1: float
    kappa0: float
    kappa1: float

    def __post_init__(self):
        if np.any(~(np.asarray(self.nu) > 0)):
            raise DomainError("nu must be positive")
        if np.any(~(np.asarray(self.tau0) > 0)) or np.any(~(np.asarray(self.tau1) > 0)):
            raise DomainError("scales tau0, tau1 must be positive")

    @property
    def feasible(self):
        """True when both shape ratios satisfy kappa / nu > -0.5."""
        nu = np.asarray(self.nu)
        return bool(np.all(np.asarray(self.kappa0) / nu > -0.5)
                    and np.all(np.asarray(self.kappa1) / nu > -0.5))

    def support(self):
        return bats_support(self)

    def logpdf(self, x):
        return bats_logpdf(self, x)

    def pdf(self, x):
        return bats_pdf(self, x)

    def cdf(self, x):
        return bats_cdf(self, x)

    def sf(self, x):
        return bats_sf(self, x)

    def quantile(self, q):
        return bats_quantile(self, q)

    def sample(self, rng, n):
        return bats_sample(self, rng, n)


def _bounds(p):
    k0 = np.asarray(p.kappa0, dtype=float)
    k1 = np.asarray(p.kappa1, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(k1 < 0,
                      p.phi1 + p.tau1 * kernels._np_spinv(np.where(k1 < 0, -1.0 / k1, 1.0)),
                      np.inf)
        lo = np.where(k0 < 0,
                      p.phi0 - p.tau0 * kernels._np_spinv(np.where(k0 < 0, -1.0 / k0, 1.0)),
                      -np.inf)
    return lo, up


def bats_support(p: BatsParams) -> Support:
    """Support ``[L, U]``; infinite in a tail whose shape is nonnegative."""
    lo, up = _bounds(p)
    return Support(_scalar(lo), _scalar(up))


def _broadcast(p, x):
    arrs = np.broadcast_arrays(np.asarray(x, dtype=float), p.phi0, p.phi1,
                               p.tau0, p.tau1, p.kappa0, p.kappa1, p.nu)
    shape = arrs[0].shape
    flat = [np.ascontiguousarray(a, dtype=float).ravel() for a in arrs]
    return shape, flat


def _h_raw(p, x):
    shape, (xf, f0, f1, t0, t1, k0, k1, nu) = _broadcast(p, x)
    h, ld, st = kernels.h_eval(xf, f0, f1, t0, t1, k0, k1)
    return shape, h, ld, st, nu


def _raise_outside(st, x):
    if np.any(st != 0):
        xs = np.asarray(x, dtype=float).ravel()
        if np.any(st > 0):
            bad = xs[np.argmax(st > 0)] if xs.size == st.size else xs[0]
            raise DomainError(f"x={bad!r} lies above the upper support bound")
        bad = xs[np.argmax(st < 0)] if xs.size == st.size else xs[0]
        raise DomainError(f"x={bad!r} lies below the lower support bound")


def h_transform(p: BatsParams, x):
    """The monotone transform ``H`` for which the BATs cdf is ``T_nu(H(x))``."""
    shape, h, _, st, _ = _h_raw(p, x)
    _raise_outside(st, np.broadcast_to(np.asarray(x, dtype=float), shape))
    return _scalar(h.reshape(shape))


def h_derivative(p: BatsParams, x):
    """``dH/dx``, always positive inside the support."""
    shape, _, ld, st, _ = _h_raw(p, x)
    _raise_outside(st, np.broadcast_to(np.asarray(x, dtype=float), shape))
    return _scalar(np.exp(ld).reshape(shape))


def _shrunk_bounds(p, shape):
    lo, up = _bounds(p)
    lo = np.broadcast_to(lo, shape).astype(float).ravel()
    up = np.broadcast_to(up, shape).astype(float).ravel()
    fin = np.isfinite(lo)
    lo[fin] = lo[fin] + 1e-12 * np.maximum(1.0, np.abs(lo[fin]))
    fin = np.isfinite(up)
    up[fin] = up[fin] - 1e-12 * np.maximum(1.0, np.abs(up[fin]))
    return lo, up


def h_inverse(p: BatsParams, z):
    """Solve ``H(x) = z`` by bracketed Newton iteration."""
    z = np.asarray(z, dtype=float)
    if np.any(~np.isfinite(z)):
        raise DomainError("h_inverse requires finite z")
    shape, (zf, f0, f1, t0, t1, k0, k1, _) = _broadcast(p, z)
    lo, up = _shrunk_bounds(p, shape)
    x, status = kernels.h_solve(zf, f0, f1, t0, t1, k0, k1, lo, up)
    if np.any(status == 1):
        i = int(np.argmax(status == 1))
        raise NumericalError(
            f"h_inverse: could not bracket z={zf[i]!r} "
            f"(phi0={f0[i]}, phi1={f1[i]}, tau0={t0[i]}, tau1={t1[i]}, "
            f"kappa0={k0[i]}, kappa1={k1[i]}, support=({lo[i]}, {up[i]}))")
    if np.any(status == 2):
        i = int(np.argmax(status == 2))
        raise NumericalError(f"h_inverse: no convergence for z={zf[i]!r}")
    return _scalar(x.reshape(shape))


def bats_logpdf(p: BatsParams, x):
    """Log density; ``-inf`` outside the support."""
    shape, h, ld, st, nu = _h_raw(p, x)
    out = np.full(h.shape, -np.inf)
    ok = st == 0
    out[ok] = student_t_logpdf(nu[ok], h[ok]) + ld[ok]
    return _scalar(out.reshape(shape))


def bats_pdf(p: BatsParams, x):
    return _scalar(np.exp(bats_logpdf(p, x)))


def bats_cdf(p: BatsParams, x):
    shape, h, _, st, nu = _h_raw(p, x)
    out = np.where(st > 0, 1.0, 0.0)
    ok = st == 0
    out[ok] = student_t_cdf(nu[ok], h[ok])
    return _scalar(out.reshape(shape))


def bats_sf(p: BatsParams, x):
    """Survival function, accurate far into the upper tail."""
    shape, h, _, st, nu = _h_raw(p, x)
    out = np.where(st < 0, 1.0, 0.0)
    ok = st == 0
    out[ok] = student_t_sf(nu[ok], h[ok])
    return _scalar(out.reshape(shape))


def bats_quantile(p: BatsParams, q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile level must lie in (0, 1)")
    nu = np.broadcast_to(np.asarray(p.nu, dtype=float), np.broadcast(q, p.nu).shape)
    z = student_t_quantile(nu, np.broadcast_to(q, nu.shape))
    return h_inverse(p, z)


def bats_sample(p: BatsParams, rng: np.random.Generator, n: int):
    """Inverse-cdf draws; scalar parameters give ``n`` values."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    u = rng.random(n)
    u[u == 0.0] = np.nextafter(0.0, 1.0)
    return bats_quantile(p, u)


# ---------------------------------------------------------------------------
# skew-normal
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SkewNormalParams:
    mu: float
    sigma: float
    alpha: float

    def __post_init__(self):
        if np.any(~(np.asarray(self.sigma) > 0)):
            raise DomainError("skew-normal scale must be positive")

    def support(self):
        return Support(-np.inf, np.inf)

    def logpdf(self, x):
        return skew_normal_logpdf(self, x)

    def pdf(self, x):
        return _scalar(np.exp(skew_normal_logpdf(self, x)))

    def cdf(self, x):
        return skew_normal_cdf(self, x)

    def sf(self, x):
        return _scalar(1.0 - np.asarray(skew_normal_cdf(self, x)))

    def quantile(self, q):
        return skew_normal_quantile(self, q)


_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def skew_normal_logpdf(p: SkewNormalParams, x):
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    return _scalar(LOG2 - np.log(p.sigma) - 0.5 * z * z - _LOG_SQRT_2PI
                   + special.log_ndtr(p.alpha * z))


def skew_normal_cdf(p: SkewNormalParams, x):
    """Closed form ``Phi(z) - 2 T(z, alpha)`` with Owen's T function."""
    z = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    z, a = np.broadcast_arrays(z, np.asarray(p.alpha, dtype=float))
    with np.errstate(invalid="ignore"):
        out = special.ndtr(z) - 2.0 * special.owens_t(z, a)
    out = np.where(np.isneginf(z), 0.0, np.where(np.isposinf(z), 1.0, out))
    return _scalar(np.clip(out, 0.0, 1.0))


def skew_normal_quantile(p: SkewNormalParams, q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("quantile level must lie in (0, 1)")
    mu, sigma, alpha, q = np.broadcast_arrays(
        np.asarray(p.mu, float), np.asarray(p.sigma, float),
        np.asarray(p.alpha, float), q)
    std = SkewNormalParams(0.0, 1.0, alpha)
    # standardized quantile lies between the half-normal and normal extremes
    a = np.full(q.shape, -40.0)
    b = np.full(q.shape, 40.0)
    x = np.where(alpha >= 0, special.ndtri(np.sqrt(q)), -special.ndtri(np.sqrt(1 - q)))
    x = np.clip(x, a + 1e-9, b - 1e-9)
    for _ in range(200):
        f = skew_normal_cdf(std, x) - q
        b = np.where(f > 0, x, b)
        a = np.where(f <= 0, x, a)
        dens = np.exp(skew_normal_logpdf(std, x))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            xn = x - f / dens
        xn = np.where((xn > a) & (xn < b), xn, 0.5 * (a + b))
        if np.all(np.abs(xn - x) <= 1e-14 * np.maximum(1.0, np.abs(x))):
            x = xn
            break
        x = xn
    return _scalar(mu + sigma * x)


# ---------------------------------------------------------------------------
# generalized Pareto
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GpdParams:
    """GPD with threshold ``mu``; ``xi = 0`` is the exponential limit."""

    mu: float
    sigma: float
    xi: float

    def __post_init__(self):
        if np.any(~(np.asarray(self.sigma) > 0)):
            raise DomainError("GPD scale must be positive")

    def support(self):
        return gpd_support(self)

    def logpdf(self, x):
        return gpd_logpdf(self, x)

    def pdf(self, x):
        return _scalar(np.exp(gpd_logpdf(self, x)))

    def cdf(self, x):
        return gpd_cdf(self, x)

    def sf(self, x):
        return gpd_sf(self, x)

    def quantile(self, q):
        return gpd_quantile(self, q)


def gpd_support(p: GpdParams) -> Support:
    xi = np.asarray(p.xi, dtype=float)
    with np.errstate(divide="ignore"):
        up = np.where(xi < 0, p.mu - p.sigma / np.where(xi < 0, xi, -1.0), np.inf)
    return Support(_scalar(np.asarray(p.mu, dtype=float) + 0.0 * up), _scalar(up))


def _gpd_log_survival(p, x):
    # log(1 - F) inside the support, -inf/0 outside
    t = (np.asarray(x, dtype=float) - p.mu) / p.sigma
    xi = np.asarray(p.xi, dtype=float)
    t, xi = np.broadcast_arrays(t, xi)
    arg = xi * t
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(arg == 0.0, 1.0, np.log1p(arg) / np.where(arg == 0.0, 1.0, arg))
        ls = -t * ratio
    ls = np.where(arg <= -1.0, -np.inf, ls)
    return t, xi, ls


def gpd_logpdf(p: GpdParams, x):
    t, xi, ls = _gpd_log_survival(p, x)
    with np.errstate(invalid="ignore"):
        # -(1 + 1/xi) log1p(xi t) == (1 + xi) * log survival
        out = -np.log(p.sigma) + (1.0 + xi) * ls
    out = np.where((t < 0) | (xi * t <= -1.0) | ~np.isfinite(ls), -np.inf, out)
    return _scalar(out)


def gpd_cdf(p: GpdParams, x):
    t, _, ls = _gpd_log_survival(p, x)
    out = np.where(t < 0, 0.0, -np.expm1(ls))
    return _scalar(np.clip(out, 0.0, 1.0))


def gpd_sf(p: GpdParams, x):
    t, _, ls = _gpd_log_survival(p, x)
    return _scalar(np.where(t < 0, 1.0, np.exp(ls)))


def gpd_quantile(p: GpdParams, q):
    q = np.asarray(q, dtype=float)
    if np.any(~((q >= 0) & (q < 1))):
        raise DomainError("GPD quantile level must lie in [0, 1)")
    xi = np.asarray(p.xi, dtype=float)
    ls = np.log1p(-q)
    xi, ls = np.broadcast_arrays(xi, ls)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(xi == 0.0, -ls, np.expm1(-xi * ls) / np.where(xi == 0.0, 1.0, xi))
    return _scalar(p.mu + p.sigma * t)
