"""Independent extended-precision reference formulas (mpmath)."""
import mpmath as mp

mp.mp.dps = 50


def mp_softplus(x):
    return mp.log(1 + mp.e ** mp.mpf(x))


def mp_term(u, kappa):
    s = mp_softplus(u)
    if kappa == 0:
        return mp.e ** mp.mpf(u)
    return (1 + mp.mpf(kappa) * s) ** (1 / mp.mpf(kappa))


def mp_h(x, p):
    x = mp.mpf(x)
    u1 = (x - mp.mpf(p.phi1)) / mp.mpf(p.tau1)
    u0 = (mp.mpf(p.phi0) - x) / mp.mpf(p.tau0)
    return mp_term(u1, p.kappa1) - mp_term(u0, p.kappa0)


def mp_h_prime(x, p):
    return mp.diff(lambda t: mp_h(t, p), mp.mpf(x))


def mp_t_logpdf(nu, t):
    nu = mp.mpf(nu)
    t = mp.mpf(t)
    return (mp.loggamma((nu + 1) / 2) - mp.loggamma(nu / 2) - mp.log(nu * mp.pi) / 2
            - (nu + 1) / 2 * mp.log(1 + t * t / nu))


def mp_t_cdf(nu, t):
    nu = mp.mpf(nu)
    t = mp.mpf(t)
    x = nu / (nu + t * t)
    tail = mp.betainc(nu / 2, mp.mpf(1) / 2, 0, x, regularized=True) / 2
    return 1 - tail if t > 0 else tail


def mp_bats_logpdf(x, p):
    return mp_t_logpdf(p.nu, mp_h(x, p)) + mp.log(mp_h_prime(x, p))


def mp_bats_cdf(x, p):
    return mp_t_cdf(p.nu, mp_h(x, p))
