"""Hot numeric kernels for the BATs transform and its log-likelihood.

Every kernel exists twice: a scalar-loop version compiled with numba and a
vectorized numpy version. Both compute the same quantities; the module-level
names (``h_eval``, ``h_solve``, ``loglik_grad``) point at whichever path
``batsfit._accel`` selected. The explicit ``*_numba`` / ``*_numpy`` names stay
available so tests and benchmarks can compare the two.

One tail term of the transform is written in terms of ``u`` (standardized
distance), the shape ``k`` and the softplus ``s = log(1 + e^u)``::

    g(u, k) = {1 + k s}^(1/k) - 1      (-> e^u as k -> 0)

and ``H(x) = g(u1, k1) - g(u0, k0)`` with ``u1 = (x - phi1) / tau1`` and
``u0 = (phi0 - x) / tau0``.  The constant ``-1`` cancels in the difference,
and writing ``g`` through ``expm1(s * log1p(k s) / (k s))`` keeps the
``k -> 0`` limit exact without a switch-over threshold.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit

# Per-observation penalty for observations outside the support while
# optimizing: PENALTY_BASE + PENALTY_QUAD * distance**2.
PENALTY_BASE = 1.0e3
PENALTY_QUAD = 1.0e3

N_LOCAL = 7  # phi0, phi1, log tau0, log tau1, kappa0, kappa1, nu


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------


@njit
def _softplus(u):
    if u > 0.0:
        return u + math.log1p(math.exp(-u))
    return math.log1p(math.exp(u))


@njit
def _expit(u):
    if u >= 0.0:
        return 1.0 / (1.0 + math.exp(-u))
    e = math.exp(u)
    return e / (1.0 + e)


@njit
def _log1p_ratio(z):
    # log1p(z) / z with the removable singularity at 0
    if z == 0.0:
        return 1.0
    return math.log1p(z) / z


@njit
def _dlog_ratio(z):
    # (z / (1 + z) - log1p(z)) / z**2, the k-derivative of log1p(k s)/k
    # divided by s**2
    if abs(z) < 1e-3:
        return (-0.5 + z * (2.0 / 3.0 + z * (-0.75 + z * (0.8 + z * (-5.0 / 6.0
                + z * (6.0 / 7.0))))))
    return (z / (1.0 + z) - math.log1p(z)) / (z * z)


@njit
def _spinv(y):
    # log(e^y - 1)
    if y > 30.0:
        return y + math.log1p(-math.exp(-y))
    return math.log(math.expm1(y))


@njit
def _h_point(x, phi0, phi1, tau0, tau1, k0, k1):
    """Return (H, log H', status) at one point; status is 0 inside the
    support, +1 above the upper bound, -1 below the lower bound."""
    u1 = (x - phi1) / tau1
    u0 = (phi0 - x) / tau0
    s1 = _softplus(u1)
    s0 = _softplus(u0)
    z1 = k1 * s1
    z0 = k0 * s0
    if z1 <= -1.0:
        return math.nan, -math.inf, 1
    if z0 <= -1.0:
        return math.nan, -math.inf, -1
    L1 = s1 * _log1p_ratio(z1)
    L0 = s0 * _log1p_ratio(z0)
    h = math.expm1(L1) - math.expm1(L0)
    lp1 = -_softplus(-u1)
    lp0 = -_softplus(-u0)
    ld1 = L1 - math.log1p(z1) + lp1 - math.log(tau1)
    ld0 = L0 - math.log1p(z0) + lp0 - math.log(tau0)
    if ld1 > ld0:
        ld = ld1 + math.log1p(math.exp(ld0 - ld1))
    else:
        ld = ld0 + math.log1p(math.exp(ld1 - ld0))
    return h, ld, 0


@njit
def h_eval_numba(x, phi0, phi1, tau0, tau1, k0, k1):
    n = x.shape[0]
    h = np.empty(n)
    ld = np.empty(n)
    st = np.empty(n, dtype=np.int64)
    for i in range(n):
        h[i], ld[i], st[i] = _h_point(x[i], phi0[i], phi1[i], tau0[i],
                                      tau1[i], k0[i], k1[i])
    return h, ld, st


@njit
def h_solve_numba(z, phi0, phi1, tau0, tau1, k0, k1, lo, hi):
    """Invert H elementwise inside the open interval (lo, hi).

    Returns (x, status) with status 0 on success, 1 when no bracket was found
    and 2 when the iteration budget ran out.
    """
    n = z.shape[0]
    out = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        zi = z[i]
        a = min(phi0[i], phi1[i]) - 50.0 * tau0[i]
        b = max(phi0[i], phi1[i]) + 50.0 * tau1[i]
        lo_i = lo[i]
        hi_i = hi[i]
        if a <= lo_i:
            a = lo_i
        if b >= hi_i:
            b = hi_i
        if a >= b:
            a = lo_i
            b = hi_i
        ha, _, sa = _h_point(a, phi0[i], phi1[i], tau0[i], tau1[i], k0[i], k1[i])
        ok = True
        it = 0
        while sa != 0 or ha > zi:
            if a <= lo_i or it >= 60:
                ok = False
                break
            a = max(a - 2.0 * (b - a), lo_i)
            ha, _, sa = _h_point(a, phi0[i], phi1[i], tau0[i], tau1[i], k0[i], k1[i])
            it += 1
        hb, _, sb = _h_point(b, phi0[i], phi1[i], tau0[i], tau1[i], k0[i], k1[i])
        it = 0
        while ok and (sb != 0 or hb < zi):
            if b >= hi_i or it >= 60:
                ok = False
                break
            b = min(b + 2.0 * (b - a), hi_i)
            hb, _, sb = _h_point(b, phi0[i], phi1[i], tau0[i], tau1[i], k0[i], k1[i])
            it += 1
        if not ok:
            out[i] = math.nan
            status[i] = 1
            continue
        tol = 1e-12 * max(1.0, abs(zi))
        # start from the secant point of the bracket
        x = a + (b - a) * 0.5
        done = False
        for _ in range(300):
            hx, ldx, sx = _h_point(x, phi0[i], phi1[i], tau0[i], tau1[i],
                                   k0[i], k1[i])
            f = hx - zi
            if sx == 0 and abs(f) <= tol:
                done = True
                break
            if sx > 0 or (sx == 0 and f > 0.0):
                b = x
            else:
                a = x
            if sx == 0:
                xn = x - f / math.exp(ldx)
            else:
                xn = math.nan
            if not (xn > a and xn < b):
                xn = 0.5 * (a + b)
            if b - a <= 4e-16 * max(abs(a), abs(b)) + 1e-300:
                x = xn
                done = True
                break
            x = xn
        out[i] = x
        if not done:
            status[i] = 2
    return out, status


@njit
def loglik_grad_numba(x, phi0, phi1, lt0, lt1, k0, k1, nu, cnu, dcnu,
                      want_grad, pen0, pen2):
    """Per-observation BATs log-density and its derivatives.

    ``phi*`` and ``lt*`` (log scales) are per-observation arrays; the shapes
    and ``nu`` are scalars. ``cnu`` is the log normalizing constant of the
    t density and ``dcnu`` its derivative in ``nu``. Observations outside the
    support get ``-(pen0 + pen2 * v**2)`` with ``v`` the distance to the
    violated bound. Returns (loglik, grad, n_violations); the gradient columns
    follow the order (phi0, phi1, log tau0, log tau1, kappa0, kappa1, nu).
    """
    n = x.shape[0]
    ll = np.empty(n)
    grad = np.zeros((n, 7)) if want_grad else np.zeros((0, 7))
    nviol = 0
    for i in range(n):
        tau0 = math.exp(lt0[i])
        tau1 = math.exp(lt1[i])
        u1 = (x[i] - phi1[i]) / tau1
        u0 = (phi0[i] - x[i]) / tau0
        s1 = _softplus(u1)
        s0 = _softplus(u0)
        z1 = k1 * s1
        z0 = k0 * s0
        if z1 <= -1.0 or z0 <= -1.0:
            nviol += 1
            pen = pen0
            if z1 <= -1.0:
                y = -1.0 / k1
                sp = _spinv(y)
                v = x[i] - (phi1[i] + tau1 * sp)
                pen += pen2 * v * v
                if want_grad:
                    dsp = 1.0 / (-math.expm1(-y))
                    # d(-pen)/dtheta = 2 pen2 v dU/dtheta
                    grad[i, 1] += 2.0 * pen2 * v
                    grad[i, 3] += 2.0 * pen2 * v * tau1 * sp
                    grad[i, 5] += 2.0 * pen2 * v * tau1 * dsp / (k1 * k1)
            if z0 <= -1.0:
                y = -1.0 / k0
                sp = _spinv(y)
                v = (phi0[i] - tau0 * sp) - x[i]
                pen += pen2 * v * v
                if want_grad:
                    dsp = 1.0 / (-math.expm1(-y))
                    grad[i, 0] -= 2.0 * pen2 * v
                    grad[i, 2] += 2.0 * pen2 * v * tau0 * sp
                    grad[i, 4] += 2.0 * pen2 * v * tau0 * dsp / (k0 * k0)
            ll[i] = -pen
            continue
        w1 = 1.0 + z1
        w0 = 1.0 + z0
        L1 = s1 * _log1p_ratio(z1)
        L0 = s0 * _log1p_ratio(z0)
        g1 = math.expm1(L1)
        g0 = math.expm1(L0)
        h = g1 - g0
        p1 = _expit(u1)
        p0 = _expit(u0)
        ld1 = L1 - math.log1p(z1) - _softplus(-u1) - lt1[i]
        ld0 = L0 - math.log1p(z0) - _softplus(-u0) - lt0[i]
        if ld1 > ld0:
            ld = ld1 + math.log1p(math.exp(ld0 - ld1))
        else:
            ld = ld0 + math.log1p(math.exp(ld1 - ld0))
        q = 1.0 + h * h / nu
        val = cnu - 0.5 * (nu + 1.0) * math.log(q) + ld
        if not math.isfinite(val):
            nviol += 1
            ll[i] = -pen0
            continue
        ll[i] = val
        if not want_grad:
            continue
        T1 = g1 + 1.0
        T0 = g0 + 1.0
        r1 = math.exp(ld1 - ld)
        r0 = math.exp(ld0 - ld)
        dl1 = s1 * s1 * _dlog_ratio(z1)
        dl0 = s0 * s0 * _dlog_ratio(z0)
        a1 = (1.0 - k1) * p1 / w1 + (1.0 - p1)
        a0 = (1.0 - k0) * p0 / w0 + (1.0 - p0)
        c1 = T1 * p1 / w1
        c0 = T0 * p0 / w0
        dlt = -(nu + 1.0) * h / (nu + h * h)
        # phi0
        grad[i, 0] = dlt * (-c0 / tau0) + r0 * (a0 / tau0)
        # phi1
        grad[i, 1] = dlt * (-c1 / tau1) + r1 * (-a1 / tau1)
        # log tau0
        grad[i, 2] = dlt * (c0 * u0) + r0 * (-a0 * u0 - 1.0)
        # log tau1
        grad[i, 3] = dlt * (-c1 * u1) + r1 * (-a1 * u1 - 1.0)
        # kappa0
        grad[i, 4] = dlt * (-T0 * dl0) + r0 * (dl0 - s0 / w0)
        # kappa1
        grad[i, 5] = dlt * (T1 * dl1) + r1 * (dl1 - s1 / w1)
        # nu
        grad[i, 6] = (dcnu - 0.5 * math.log(q)
                      + 0.5 * (nu + 1.0) * h * h / (nu * (nu + h * h)))
    return ll, grad, nviol


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _np_softplus(u):
    return np.logaddexp(0.0, u)


def _np_log1p_ratio(z):
    out = np.ones_like(z)
    nz = z != 0.0
    out[nz] = np.log1p(z[nz]) / z[nz]
    return out


def _np_dlog_ratio(z):
    out = np.empty_like(z)
    small = np.abs(z) < 1e-3
    zs = z[small]
    out[small] = (-0.5 + zs * (2.0 / 3.0 + zs * (-0.75 + zs * (0.8 + zs * (
        -5.0 / 6.0 + zs * (6.0 / 7.0))))))
    zb = z[~small]
    out[~small] = (zb / (1.0 + zb) - np.log1p(zb)) / (zb * zb)
    return out


def _np_spinv(y):
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore"):
        return np.where(y > 30.0, y + np.log1p(-np.exp(-np.clip(y, 30.0, 700.0))),
                        np.log(np.expm1(np.minimum(y, 30.0))))


def _np_terms(x, phi0, phi1, tau0, tau1, k0, k1):
    u1 = (x - phi1) / tau1
    u0 = (phi0 - x) / tau0
    s1 = _np_softplus(u1)
    s0 = _np_softplus(u0)
    z1 = k1 * s1
    z0 = k0 * s0
    return u1, u0, s1, s0, z1, z0


def h_eval_numpy(x, phi0, phi1, tau0, tau1, k0, k1):
    u1, u0, s1, s0, z1, z0 = _np_terms(x, phi0, phi1, tau0, tau1, k0, k1)
    st = np.zeros(x.shape, dtype=np.int64)
    st[z0 <= -1.0] = -1
    st[z1 <= -1.0] = 1
    inside = st == 0
    z1 = np.where(inside, z1, 0.0)
    z0 = np.where(inside, z0, 0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        L1 = s1 * _np_log1p_ratio(z1)
        L0 = s0 * _np_log1p_ratio(z0)
        h = np.expm1(L1) - np.expm1(L0)
        ld1 = L1 - np.log1p(z1) - _np_softplus(-u1) - np.log(tau1)
        ld0 = L0 - np.log1p(z0) - _np_softplus(-u0) - np.log(tau0)
        ld = np.logaddexp(ld1, ld0)
    h = np.where(inside, h, np.nan)
    ld = np.where(inside, ld, -np.inf)
    return h, ld, st


def h_solve_numpy(z, phi0, phi1, tau0, tau1, k0, k1, lo, hi):
    z = np.asarray(z, dtype=float)
    args = (phi0, phi1, tau0, tau1, k0, k1)
    a = np.minimum(phi0, phi1) - 50.0 * tau0
    b = np.maximum(phi0, phi1) + 50.0 * tau1
    a = np.maximum(a, lo)
    b = np.minimum(b, hi)
    bad = a >= b
    a = np.where(bad, lo, a)
    b = np.where(bad, hi, b)

    def H(xv):
        h, ld, st = h_eval_numpy(xv, *args)
        return h, ld, st

    status = np.zeros(z.shape, dtype=np.int64)
    ha, _, sa = H(a)
    need = (sa != 0) | (ha > z)
    for _ in range(60):
        if not need.any():
            break
        stuck = need & (a <= lo)
        status[stuck] = 1
        need &= ~stuck
        a = np.where(need, np.maximum(a - 2.0 * (b - a), lo), a)
        ha, _, sa = H(a)
        need &= (sa != 0) | (ha > z)
    status[need] = 1
    hb, _, sb = H(b)
    need = (status == 0) & ((sb != 0) | (hb < z))
    for _ in range(60):
        if not need.any():
            break
        stuck = need & (b >= hi)
        status[stuck] = 1
        need &= ~stuck
        b = np.where(need, np.minimum(b + 2.0 * (b - a), hi), b)
        hb, _, sb = H(b)
        need &= (sb != 0) | (hb < z)
    status[need] = 1

    tol = 1e-12 * np.maximum(1.0, np.abs(z))
    x = 0.5 * (a + b)
    active = status == 0
    for _ in range(300):
        if not active.any():
            break
        hx, ldx, sx = H(x)
        f = hx - z
        conv = active & (sx == 0) & (np.abs(f) <= tol)
        active &= ~conv
        upper = (sx > 0) | ((sx == 0) & (f > 0.0))
        b = np.where(active & upper, x, b)
        a = np.where(active & ~upper, x, a)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            xn = x - f / np.exp(ldx)
        ok = (sx == 0) & (xn > a) & (xn < b)
        xn = np.where(ok, xn, 0.5 * (a + b))
        collapsed = active & (b - a <= 4e-16 * np.maximum(np.abs(a), np.abs(b)) + 1e-300)
        x = np.where(active, xn, x)
        active &= ~collapsed
    status[active] = 2
    x = np.where(status == 1, np.nan, x)
    return x, status


def loglik_grad_numpy(x, phi0, phi1, lt0, lt1, k0, k1, nu, cnu, dcnu,
                      want_grad, pen0, pen2):
    n = x.shape[0]
    tau0 = np.exp(lt0)
    tau1 = np.exp(lt1)
    u1, u0, s1, s0, z1, z0 = _np_terms(x, phi0, phi1, tau0, tau1, k0, k1)
    out1 = z1 <= -1.0
    out0 = z0 <= -1.0
    viol = out1 | out0
    z1 = np.where(viol, 0.0, z1)
    z0 = np.where(viol, 0.0, z0)
    w1 = 1.0 + z1
    w0 = 1.0 + z0
    L1 = s1 * _np_log1p_ratio(z1)
    L0 = s0 * _np_log1p_ratio(z0)
    with np.errstate(over="ignore", invalid="ignore"):
        g1 = np.expm1(L1)
        g0 = np.expm1(L0)
        h = g1 - g0
        ld1 = L1 - np.log1p(z1) - _np_softplus(-u1) - lt1
        ld0 = L0 - np.log1p(z0) - _np_softplus(-u0) - lt0
        ld = np.logaddexp(ld1, ld0)
        q = 1.0 + h * h / nu
        ll = cnu - 0.5 * (nu + 1.0) * np.log(q) + ld
    nonfinite = ~viol & ~np.isfinite(ll)
    grad = np.zeros((n, N_LOCAL)) if want_grad else np.zeros((0, N_LOCAL))
    if want_grad:
        with np.errstate(over="ignore", invalid="ignore"):
            T1 = g1 + 1.0
            T0 = g0 + 1.0
            r1 = np.exp(ld1 - ld)
            r0 = np.exp(ld0 - ld)
            p1 = np.exp(-_np_softplus(-u1))
            p0 = np.exp(-_np_softplus(-u0))
            dl1 = s1 * s1 * _np_dlog_ratio(z1)
            dl0 = s0 * s0 * _np_dlog_ratio(z0)
            a1 = (1.0 - k1) * p1 / w1 + (1.0 - p1)
            a0 = (1.0 - k0) * p0 / w0 + (1.0 - p0)
            c1 = T1 * p1 / w1
            c0 = T0 * p0 / w0
            dlt = -(nu + 1.0) * h / (nu + h * h)
            grad[:, 0] = dlt * (-c0 / tau0) + r0 * (a0 / tau0)
            grad[:, 1] = dlt * (-c1 / tau1) + r1 * (-a1 / tau1)
            grad[:, 2] = dlt * (c0 * u0) + r0 * (-a0 * u0 - 1.0)
            grad[:, 3] = dlt * (-c1 * u1) + r1 * (-a1 * u1 - 1.0)
            grad[:, 4] = dlt * (-T0 * dl0) + r0 * (dl0 - s0 / w0)
            grad[:, 5] = dlt * (T1 * dl1) + r1 * (dl1 - s1 / w1)
            grad[:, 6] = (dcnu - 0.5 * np.log(q)
                          + 0.5 * (nu + 1.0) * h * h / (nu * (nu + h * h)))
        grad[viol | nonfinite] = 0.0
    ll = np.where(nonfinite, -pen0, ll)
    if viol.any():
        pen = np.where(viol, pen0, 0.0)
        if out1.any():
            y = -1.0 / k1
            sp = float(_np_spinv(y))
            v = np.where(out1, x - (phi1 + tau1 * sp), 0.0)
            pen = pen + pen2 * v * v
            if want_grad:
                dsp = 1.0 / (-math.expm1(-y))
                grad[:, 1] += 2.0 * pen2 * v
                grad[:, 3] += 2.0 * pen2 * v * tau1 * sp
                grad[:, 5] += 2.0 * pen2 * v * tau1 * dsp / (k1 * k1)
        if out0.any():
            y = -1.0 / k0
            sp = float(_np_spinv(y))
            v = np.where(out0, (phi0 - tau0 * sp) - x, 0.0)
            pen = pen + pen2 * v * v
            if want_grad:
                dsp = 1.0 / (-math.expm1(-y))
                grad[:, 0] -= 2.0 * pen2 * v
                grad[:, 2] += 2.0 * pen2 * v * tau0 * sp
                grad[:, 4] += 2.0 * pen2 * v * tau0 * dsp / (k0 * k0)
        ll = np.where(viol, -pen, ll)
    return ll, grad, int(viol.sum() + nonfinite.sum())


if USE_NUMBA:
    h_eval = h_eval_numba
    h_solve = h_solve_numba
    loglik_grad = loglik_grad_numba
else:
    h_eval = h_eval_numpy
    h_solve = h_solve_numpy
    loglik_grad = loglik_grad_numpy
