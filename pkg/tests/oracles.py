"""High-precision reference implementations used only by the tests.

Everything here is written directly from the closed forms with mpmath and
never imports the package under test.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 40


def skst_constants(xi, nu):
    xi = mp.mpf(xi)
    nu = mp.mpf(nu)
    mu1 = 2 * mp.sqrt(nu - 2) / (nu - 1) * mp.gamma((nu + 1) / 2) / (mp.gamma(nu / 2) * mp.gamma(mp.mpf(1) / 2))
    m = mu1 * (xi - 1 / xi)
    s = mp.sqrt((1 - mu1**2) * (xi**2 + 1 / xi**2) + 2 * mu1**2 - 1)
    g = 2 / (xi + 1 / xi)
    c = mp.loggamma((nu + 1) / 2) - mp.loggamma(nu / 2) - mp.log(mp.pi * (nu - 2)) / 2
    return mu1, m, s, g, c


def skst_logpdf(r, mu, sigma, xi, nu):
    mu1, m, s, g, c = skst_constants(xi, nu)
    r, mu, sigma, xi, nu = (mp.mpf(v) for v in (r, mu, sigma, xi, nu))
    z = (r - mu) / sigma * s + m
    xs = 1 if z == 0 else (1 / xi if z < 0 else xi)
    return mp.log(g) + mp.log(s) + c - mp.log(sigma) - (nu + 1) / 2 * mp.log(1 + z**2 / ((nu - 2) * xs**2))


def skst_pdf(r, mu, sigma, xi, nu):
    return mp.exp(skst_logpdf(r, mu, sigma, xi, nu))


def skst_cdf_quad(r, mu, sigma, xi, nu):
    """CDF by adaptive quadrature of the density, split at the mode."""
    _, m, s, _, _ = skst_constants(xi, nu)
    mode = mp.mpf(mu) - mp.mpf(sigma) * m / s
    f = lambda x: skst_pdf(x, mu, sigma, xi, nu)  # noqa: E731
    r = mp.mpf(r)
    if r <= mode:
        return mp.quad(f, [-mp.inf, r])
    return mp.quad(f, [-mp.inf, mode]) + mp.quad(f, [mode, r])


def skst_quantile_bisect(u, mu, sigma, xi, nu, lo=-50.0, hi=50.0, iters=80):
    lo, hi, u = mp.mpf(lo), mp.mpf(hi), mp.mpf(u)
    for _ in range(iters):
        mid = (lo + hi) / 2
        if skst_cdf_quad(mid, mu, sigma, xi, nu) < u:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def skst_score_fd(r, mu, sigma, xi, nu, h=mp.mpf("1e-15")):
    """Central difference of the log density in log(sigma), at high precision."""
    th = mp.log(mp.mpf(sigma))
    fp = skst_logpdf(r, mu, mp.exp(th + h), xi, nu)
    fm = skst_logpdf(r, mu, mp.exp(th - h), xi, nu)
    return (fp - fm) / (2 * h)


def chi2_sf(x, df):
    """Upper tail of chi-square via the regularized upper incomplete gamma."""
    return mp.gammainc(mp.mpf(df) / 2, mp.mpf(x) / 2, mp.inf, regularized=True)


def kupiec_lr(x, n, alpha):
    x, n, a = mp.mpf(x), mp.mpf(n), mp.mpf(alpha)

    def xlog(k, p):
        return 0 if k == 0 else k * mp.log(p)

    null = xlog(n - x, 1 - a) + xlog(x, a)
    alt = xlog(n - x, 1 - x / n) + xlog(x, x / n)
    return -2 * (null - alt)


def markov_lr_ind(hits):
    n = {(i, j): 0 for i in (0, 1) for j in (0, 1)}
    for prev, cur in zip(hits[:-1], hits[1:]):
        n[(prev, cur)] += 1

    def xlog(k, p):
        return mp.mpf(0) if k == 0 else k * mp.log(p)

    n00, n01, n10, n11 = n[(0, 0)], n[(0, 1)], n[(1, 0)], n[(1, 1)]
    pi = mp.mpf(n01 + n11) / (n00 + n01 + n10 + n11)
    pi01 = mp.mpf(n01) / (n00 + n01) if n00 + n01 else mp.mpf(0)
    pi11 = mp.mpf(n11) / (n10 + n11) if n10 + n11 else mp.mpf(0)
    restricted = xlog(n00 + n10, 1 - pi) + xlog(n01 + n11, pi)
    unrestricted = xlog(n00, 1 - pi01) + xlog(n01, pi01) + xlog(n10, 1 - pi11) + xlog(n11, pi11)
    return -2 * (restricted - unrestricted)
