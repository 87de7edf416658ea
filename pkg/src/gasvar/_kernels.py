"""Compiled inner loops for the log-scale score recursion.

Filtering and simulation share :func:`_logpdf_score` so that a path
simulated here and filtered back produces bit-identical states.
"""

import math

import numpy as np
from numba import njit

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
# exp(theta) must stay inside the double range; beyond this the path is explosive
THETA_MAX = 700.0


@njit(cache=True, nogil=True, error_model="numpy")
def _state_ok(theta):
    return abs(theta) < THETA_MAX


@njit(cache=True, nogil=True, error_model="numpy")
def _logpdf_score(r, mu, sigma, gaussian, xi, nu, m, s, const):
    # const = log g + log s + c (sigma-free part of the log density)
    w = (r - mu) / sigma
    if gaussian:
        return -LOG_SQRT_2PI - math.log(sigma) - 0.5 * w * w, w * w - 1.0
    ws = w * s
    z = ws + m
    if z < 0.0:
        xs = 1.0 / xi
    elif z > 0.0:
        xs = xi
    else:
        xs = 1.0
    denom = (nu - 2.0) * xs * xs
    ld = const - math.log(sigma) - 0.5 * (nu + 1.0) * math.log1p(z * z / denom)
    score = (nu + 1.0) * z * ws / (denom + z * z) - 1.0
    return ld, score


@njit(cache=True, nogil=True, error_model="numpy")
def filter_loop(returns, kappa, a, b, mu, gaussian, xi, nu, m, s, const, theta, score):
    """Run the recursion in place.

    ``theta`` has length ``T + 1`` (the last slot receives the one-step-ahead
    state).  Returns ``(loglik, bad)`` where ``bad`` is the first index whose
    state or likelihood contribution is non-finite, or -1.
    """
    n = returns.shape[0]
    theta[0] = kappa / (1.0 - b)
    loglik = 0.0
    for t in range(n):
        ld, sc = _logpdf_score(returns[t], mu, math.exp(theta[t]), gaussian, xi, nu, m, s, const)
        nxt = kappa + a * sc + b * theta[t]
        score[t] = sc
        loglik += ld
        if not (math.isfinite(ld) and _state_ok(nxt)):
            return loglik, t
        theta[t + 1] = nxt
    return loglik, -1


@njit(cache=True, nogil=True, error_model="numpy")
def filter_loglik(returns, kappa, a, b, mu, gaussian, xi, nu, m, s, const):
    """Log-likelihood only; ``-inf`` when the recursion explodes."""
    theta = kappa / (1.0 - b)
    loglik = 0.0
    for t in range(returns.shape[0]):
        ld, sc = _logpdf_score(returns[t], mu, math.exp(theta), gaussian, xi, nu, m, s, const)
        theta = kappa + a * sc + b * theta
        loglik += ld
        if not (math.isfinite(ld) and _state_ok(theta)):
            return -np.inf
    return loglik


@njit(cache=True, nogil=True, error_model="numpy")
def simulate_loop(eps, kappa, a, b, mu, gaussian, xi, nu, m, s, const, theta, returns):
    """Generate returns from standardized innovations ``eps``; mirrors :func:`filter_loop`."""
    theta[0] = kappa / (1.0 - b)
    for t in range(eps.shape[0]):
        sigma = math.exp(theta[t])
        r = mu + sigma * eps[t]
        returns[t] = r
        ld, sc = _logpdf_score(r, mu, sigma, gaussian, xi, nu, m, s, const)
        theta[t + 1] = kappa + a * sc + b * theta[t]
        if not _state_ok(theta[t + 1]):
            return t
    return -1


@njit(cache=True, nogil=True, error_model="numpy")
def advance_many(theta0, eps, kappa, a, b, mu, gaussian, xi, nu, m, s, const, out):
    """Propagate independent paths ``eps[i, :]`` from the common state ``theta0``.

    ``out[i]`` receives the return at the final step, or NaN for an explosive path.
    """
    n, h = eps.shape
    for i in range(n):
        theta = theta0
        r = np.nan
        for k in range(h):
            sigma = math.exp(theta)
            r = mu + sigma * eps[i, k]
            ld, sc = _logpdf_score(r, mu, sigma, gaussian, xi, nu, m, s, const)
            theta = kappa + a * sc + b * theta
            if not (_state_ok(theta) and math.isfinite(r)):
                r = np.nan
                break
        out[i] = r
