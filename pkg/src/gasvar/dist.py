"""
Skew-Student-t distribution family in the mean/variance parameterization.

The skewed density follows the Fernandez-Steel construction applied to a
unit-variance Student-t and shifted/scaled (Bauwens-Laurent) so that
``E[r] = mu`` and ``Var[r] = sigma**2``.  The Student-t (``xi = 1``) and
Normal (``xi = 1``, ``nu = inf``) laws are nested special cases.

All public functions accept scalars or numpy arrays for the evaluation point
and return numpy values of matching shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import special

__all__ = [
    "DistParams",
    "DistributionError",
    "Family",
    "SkstConstants",
    "cdf",
    "constants",
    "log_density",
    "log_gamma_half_ratio",
    "quantile",
    "sample",
    "score_logscale",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


class DistributionError(ValueError):
    """Invalid distribution parameters or arguments."""


class Family(str, Enum):
    NORM = "norm"
    STD = "std"
    SSTD = "sstd"


@dataclass(frozen=True)
class DistParams:
    """Full parameter set of a conditional return distribution.

    Parameters
    ----------
    family : Family
        Distribution family tag.
    mu : float
        Location, equal to the mean.
    sigma : float
        Scale, equal to the standard deviation.
    xi : float
        Skewness (``xi = 1`` is symmetric, ``xi < 1`` left-skewed).
    nu : float
        Degrees of freedom; ``math.inf`` for the Normal family.
    """

    family: Family
    mu: float = 0.0
    sigma: float = 1.0
    xi: float = 1.0
    nu: float = math.inf

    def __post_init__(self) -> None:
        family = Family(self.family)
        object.__setattr__(self, "family", family)
        for name in ("mu", "sigma", "xi", "nu"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if family is Family.NORM:
            object.__setattr__(self, "nu", math.inf)
        if not math.isfinite(self.mu):
            raise DistributionError(f"mu must be finite, got {self.mu}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise DistributionError(f"sigma must be positive and finite, got {self.sigma}")
        if not (self.xi > 0.0 and math.isfinite(self.xi)):
            raise DistributionError(f"xi must be positive, got {self.xi}")
        if not self.nu > 2.0:
            raise DistributionError(f"nu must exceed 2, got {self.nu}")
        if family is not Family.SSTD and self.xi != 1.0:
            raise DistributionError(f"family {family.value!r} requires xi == 1, got {self.xi}")

    @property
    def is_gaussian(self) -> bool:
        return math.isinf(self.nu)


class SkstConstants(NamedTuple):
    mu1: float
    m: float
    s_const: float
    g: float
    c: float


def log_gamma_half_ratio(nu: float) -> float:
    """``log Gamma((nu + 1)/2) - log Gamma(nu/2)``.

    For large ``nu`` the difference of two huge log-gammas cancels badly, so
    an asymptotic series in ``x = nu/2`` is used instead.
    """
    x = 0.5 * nu
    if x < 50.0:
        return float(special.gammaln(x + 0.5) - special.gammaln(x))
    ix = 1.0 / x
    ix2 = ix * ix
    series = ix * (-1.0 / 8.0 + ix2 * (1.0 / 192.0 + ix2 * (-1.0 / 640.0 + ix2 * (17.0 / 14336.0 - ix2 * 31.0 / 18432.0))))
    return 0.5 * math.log(x) + series


def constants(xi: float, nu: float) -> SkstConstants:
    """Dimensionless constants of the standardized skew-t.

    ``nu = inf`` gives the Normal limit, where ``mu1 = sqrt(2/pi)``.
    """
    xi = float(xi)
    nu = float(nu)
    if not xi > 0.0 or not math.isfinite(xi):
        raise DistributionError(f"xi must be positive, got {xi}")
    if not nu > 2.0:
        raise DistributionError(f"nu must exceed 2, got {nu}")
    if math.isinf(nu):
        mu1 = SQRT_2_OVER_PI
        c = -LOG_SQRT_2PI
    else:
        lg = log_gamma_half_ratio(nu)
        mu1 = 2.0 * math.sqrt(nu - 2.0) / (nu - 1.0) * math.exp(lg) / math.sqrt(math.pi)
        c = lg - 0.5 * math.log(math.pi * (nu - 2.0))
    if xi == 1.0:
        return SkstConstants(mu1, 0.0, 1.0, 1.0, c)
    m = mu1 * (xi - 1.0 / xi)
    s = math.sqrt((1.0 - mu1 * mu1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * mu1 * mu1 - 1.0)
    g = 2.0 / (xi + 1.0 / xi)
    return SkstConstants(mu1, m, s, g, c)


def _as_params(p: DistParams) -> DistParams:
    if not isinstance(p, DistParams):
        raise DistributionError(f"expected DistParams, got {type(p).__name__}")
    return p


def _std_t_cdf(x, nu):
    # unit-variance Student-t
    return special.stdtr(nu, x * math.sqrt(nu / (nu - 2.0)))


def _std_t_ppf(q, nu):
    return special.stdtrit(nu, q) * math.sqrt((nu - 2.0) / nu)


def log_density(r, p: DistParams):
    """Log-density of ``r``, including the ``-log(sigma)`` Jacobian."""
    p = _as_params(p)
    r = np.asarray(r, dtype=float)
    w = (r - p.mu) / p.sigma
    if p.is_gaussian:
        return -LOG_SQRT_2PI - math.log(p.sigma) - 0.5 * w * w
    k = constants(p.xi, p.nu)
    z = w * k.s_const + k.m
    xs = np.where(z < 0.0, 1.0 / p.xi, np.where(z > 0.0, p.xi, 1.0))
    q = np.abs(z) / (xs * math.sqrt(p.nu - 2.0))
    # log1p(q^2) without overflow for astronomically large |q|
    with np.errstate(divide="ignore"):
        kernel = np.where(q > 1e150, 2.0 * np.log(q), np.log1p(np.minimum(q, 1e150) ** 2))
    const = math.log(k.g) + math.log(k.s_const) + k.c - math.log(p.sigma)
    return const - 0.5 * (p.nu + 1.0) * kernel


def cdf(r, p: DistParams):
    """Distribution function, closed form via the Student-t CDF on each side of the mode."""
    p = _as_params(p)
    r = np.asarray(r, dtype=float)
    w = (r - p.mu) / p.sigma
    if p.is_gaussian:
        return special.ndtr(w)
    k = constants(p.xi, p.nu)
    z = w * k.s_const + k.m
    xi2 = p.xi * p.xi
    lower = 2.0 / (1.0 + xi2) * _std_t_cdf(np.minimum(z, 0.0) * p.xi, p.nu)
    upper = 1.0 - 2.0 * xi2 / (1.0 + xi2) * _std_t_cdf(-np.maximum(z, 0.0) / p.xi, p.nu)
    return np.where(z < 0.0, lower, upper)


def quantile(prob, p: DistParams):
    """Inverse of :func:`cdf` for ``0 < prob < 1``."""
    p = _as_params(p)
    u = np.asarray(prob, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise DistributionError("quantile requires 0 < prob < 1")
    if p.is_gaussian:
        return p.mu + p.sigma * special.ndtri(u)
    k = constants(p.xi, p.nu)
    xi2 = p.xi * p.xi
    split = 1.0 / (1.0 + xi2)
    left = u < split
    z_left = _std_t_ppf(np.where(left, u, split) * (1.0 + xi2) / 2.0, p.nu) / p.xi
    tail = np.where(left, 1.0 - split, 1.0 - u) * (1.0 + xi2) / (2.0 * xi2)
    z_right = -p.xi * _std_t_ppf(np.minimum(tail, 0.5), p.nu)
    z = np.where(left, z_left, z_right)
    return p.mu + p.sigma * ((z - k.m) / k.s_const)


def score_logscale(r, p: DistParams):
    """Derivative of :func:`log_density` with respect to ``log(sigma)``."""
    p = _as_params(p)
    r = np.asarray(r, dtype=float)
    w = (r - p.mu) / p.sigma
    if p.is_gaussian:
        return w * w - 1.0
    k = constants(p.xi, p.nu)
    ws = w * k.s_const
    z = ws + k.m
    xs = np.where(z < 0.0, 1.0 / p.xi, np.where(z > 0.0, p.xi, 1.0))
    return (p.nu + 1.0) * z * ws / ((p.nu - 2.0) * xs * xs + z * z) - 1.0


def uniforms(n: int, seed: int) -> np.ndarray:
    """``n`` uniforms on the open interval (0, 1) from a counter-based Philox stream."""
    if n < 1:
        raise DistributionError(f"n must be >= 1, got {n}")
    u = np.random.Generator(np.random.Philox(seed)).random(n)
    return np.clip(u, 2.0**-54, 1.0 - 2.0**-53)


def sample(p: DistParams, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. variates by inverse transform; deterministic in ``seed``."""
    return quantile(uniforms(n, seed), _as_params(p))
