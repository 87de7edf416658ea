"""
GAS(1,1) recursion for the log-scale, likelihood evaluation and ML estimation.

The state is ``theta_t = log(sigma_t)`` and evolves as::

    theta[t+1] = kappa + A * score[t] + B * theta[t]

with ``score[t]`` the derivative of the conditional log density with respect
to ``theta_t`` (unscaled).  Location, skewness and tail parameters are static.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dist import DistParams, Family, constants, uniforms, quantile
from .optim import bfgs, numerical_hessian

__all__ = [
    "EstimationError",
    "ExplosiveFilterError",
    "FilterOutput",
    "FitResult",
    "GasModel",
    "estimate",
    "filter_path",
    "simulate_path",
]

logger = logging.getLogger(__name__)

MIN_OBS = 100


class ExplosiveFilterError(ArithmeticError):
    def __init__(self, t: int):
        super().__init__(f"filter produced a non-finite state at t={t}")
        self.t = t


class EstimationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GasModel:
    """Score-driven volatility model with static shape ``(mu, nu, xi)``."""

    family: Family
    kappa: float
    a_coef: float
    b_coef: float
    mu: float = 0.0
    xi: float = 1.0
    nu: float = math.inf

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family(self.family))
        if not abs(self.b_coef) < 1.0:
            raise ValueError(f"|b_coef| must be < 1, got {self.b_coef}")
        if not self.a_coef >= 0.0:
            raise ValueError(f"a_coef must be >= 0, got {self.a_coef}")
        if not math.isfinite(self.kappa):
            raise ValueError(f"kappa must be finite, got {self.kappa}")
        # delegate shape validation (and NORM's nu = inf) to DistParams
        p = self.dist_params(1.0)
        object.__setattr__(self, "nu", p.nu)

    def dist_params(self, sigma: float) -> DistParams:
        return DistParams(self.family, self.mu, sigma, self.xi, self.nu)

    def innovation_params(self) -> DistParams:
        """Zero-mean, unit-variance innovation distribution."""
        return DistParams(self.family, 0.0, 1.0, self.xi, self.nu)

    @property
    def unconditional_theta(self) -> float:
        return self.kappa / (1.0 - self.b_coef)

    def _kernel_args(self) -> tuple:
        gaussian = math.isinf(self.nu)
        k = constants(self.xi, self.nu)
        const = math.log(k.g) + math.log(k.s_const) + k.c
        return (self.kappa, self.a_coef, self.b_coef, self.mu, gaussian, self.xi,
                self.nu if not gaussian else 0.0, k.m, k.s_const, const)


@dataclass(frozen=True)
class FilterOutput:
    theta_path: np.ndarray
    score_path: np.ndarray
    loglik: float
    theta_next: float


@dataclass(frozen=True)
class FitResult:
    model: GasModel
    loglik: float
    converged: bool
    iterations: int
    theta_path: np.ndarray
    theta_next: float
    nobs: int
    standard_errors: dict[str, float] | None = None
    message: str = ""

    def to_dict(self) -> dict:
        m = self.model
        return {
            "dist": m.family.value,
            "kappa": m.kappa,
            "a": m.a_coef,
            "b": m.b_coef,
            "mu": m.mu,
            "xi": m.xi,
            "nu": None if math.isinf(m.nu) else m.nu,
            "loglik": self.loglik,
            "converged": self.converged,
            "iterations": self.iterations,
            "nobs": self.nobs,
            "standard_errors": self.standard_errors,
            "message": self.message,
        }


def _check_returns(returns) -> np.ndarray:
    r = np.ascontiguousarray(returns, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("returns must be a non-empty 1-d array")
    if not np.all(np.isfinite(r)):
        raise ValueError("returns contain non-finite values")
    return r


def filter_path(returns, model: GasModel) -> FilterOutput:
    """Filter ``returns`` through the recursion, starting at the unconditional level."""
    r = _check_returns(returns)
    theta = np.empty(r.size + 1)
    score = np.empty(r.size)
    loglik, bad = _kernels.filter_loop(r, *model._kernel_args(), theta, score)
    if bad >= 0:
        raise ExplosiveFilterError(bad)
    return FilterOutput(theta[:-1], score, float(loglik), float(theta[-1]))


def simulate_path(model: GasModel, T: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Simulate ``T`` returns and the log-scale states they were drawn with."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    eps = quantile(uniforms(T, seed), model.innovation_params())
    theta = np.empty(T + 1)
    returns = np.empty(T)
    bad = _kernels.simulate_loop(eps, *model._kernel_args(), theta, returns)
    if bad >= 0:
        raise ExplosiveFilterError(bad)
    return returns, theta[:-1]


# ---------------------------------------------------------------------------
# estimation

_NAMES = ("kappa", "a", "b", "mu", "nu", "xi")


def _to_vector(model: GasModel) -> np.ndarray:
    x = [model.kappa, math.log(max(model.a_coef, 1e-300)), math.atanh(model.b_coef), model.mu]
    if model.family is not Family.NORM:
        nu = model.nu if math.isfinite(model.nu) else 2.0 + math.exp(20.0)
        x.append(math.log(nu - 2.0))
    if model.family is Family.SSTD:
        x.append(math.log(model.xi))
    return np.array(x)


def _from_vector(x: np.ndarray, family: Family) -> GasModel:
    nu = 2.0 + math.exp(x[4]) if family is not Family.NORM else math.inf
    xi = math.exp(x[5]) if family is Family.SSTD else 1.0
    return GasModel(family, float(x[0]), math.exp(x[1]), math.tanh(x[2]), float(x[3]), xi, nu)


def _default_starts(r: np.ndarray, family: Family) -> list[GasModel]:
    mean = float(r.mean())
    log_sd = math.log(float(r.std()))
    starts = []
    for a0, b0, nu0 in ((0.05, 0.9, 8.0), (0.1, 0.97, 5.0), (0.02, 0.8, 20.0)):
        nu = nu0 if family is not Family.NORM else math.inf
        starts.append(GasModel(family, (1.0 - b0) * log_sd, a0, b0, mean, 1.0, nu))
    return starts


def _coerce_start(start: GasModel, family: Family) -> GasModel:
    """Embed a (possibly nested) model into ``family``'s parameter space."""
    nu = start.nu
    if family is Family.NORM:
        nu = math.inf
    xi = start.xi if family is Family.SSTD else 1.0
    return GasModel(family, start.kappa, start.a_coef, start.b_coef, start.mu, xi, nu)


def _objective(r: np.ndarray, family: Family):
    n = r.size

    def f(x: np.ndarray) -> float:
        if not np.all(np.isfinite(x)) or abs(x[2]) > 18.0 or x[1] > 5.0:
            return math.inf
        if family is not Family.NORM and not (-30.0 < x[4] < 30.0):
            return math.inf
        if family is Family.SSTD and abs(x[5]) > 5.0:
            return math.inf
        try:
            model = _from_vector(x, family)
        except ValueError:
            return math.inf
        ll = _kernels.filter_loglik(r, *model._kernel_args())
        if not math.isfinite(ll):
            return math.inf
        return -ll / n

    return f


def _standard_errors(f, x: np.ndarray, model: GasModel, n: int) -> dict[str, float] | None:
    hess = numerical_hessian(f, x) * n
    try:
        cov = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return None
    var = np.diag(cov)
    if np.any(var < 0.0):
        return None
    se_t = np.sqrt(var)
    # delta method: derivative of natural parameter wrt transformed coordinate
    jac = [1.0, model.a_coef, 1.0 - model.b_coef**2, 1.0]
    if model.family is not Family.NORM:
        jac.append(model.nu - 2.0)
    if model.family is Family.SSTD:
        jac.append(model.xi)
    names = _NAMES[: len(jac)]
    return {name: float(abs(j) * s) for name, j, s in zip(names, jac, se_t)}


def estimate(returns, spec: Family, *, starts: list[GasModel] | None = None,
             min_obs: int = MIN_OBS, gtol: float = 1e-5, ftol: float = 1e-9,
             maxiter: int = 1000, compute_se: bool = False, workers: int = 1) -> FitResult:
    """Maximum-likelihood fit of a GAS(1,1) log-scale model.

    Parameters
    ----------
    returns : array_like
        Return series, at least ``min_obs`` finite values.
    spec : Family
        Conditional distribution.
    starts : list of GasModel, optional
        Extra starting points tried after the three defaults.  Models of a
        nested family are embedded (e.g. a Normal fit seeds a Student-t fit
        at ``nu`` close to infinity).
    compute_se : bool
        Attach delta-method standard errors from a numerical Hessian.
    workers : int
        Threads used to run the starts; the selected optimum does not depend on it.

    Returns
    -------
    FitResult
        Best optimum over all starts (lowest objective, earliest start on ties).
    """
    family = Family(spec)
    try:
        r = _check_returns(returns)
    except ValueError as exc:
        raise EstimationError(str(exc)) from exc
    if r.size < min_obs:
        raise EstimationError(f"need at least {min_obs} observations, got {r.size}")
    if not float(r.std()) > 0.0:
        raise EstimationError("returns have zero variance")

    f = _objective(r, family)
    candidates = _default_starts(r, family) + [_coerce_start(s, family) for s in (starts or [])]
    x0s = [_to_vector(m) for m in candidates]

    def run(x0):
        return bfgs(f, x0, gtol=gtol, ftol=ftol, maxiter=maxiter)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, x0s))
    else:
        results = [run(x0) for x0 in x0s]

    feasible = [res for res in results if math.isfinite(res.fun)]
    if not feasible:
        raise EstimationError("no feasible starting point")
    best = min(feasible, key=lambda res: res.fun)
    model = _from_vector(best.x, family)
    out = filter_path(r, model)
    se = _standard_errors(f, best.x, model, r.size) if compute_se else None
    if not best.converged:
        logger.debug("estimation stopped without gradient convergence: %s", best.message)
    return FitResult(model, out.loglik, best.converged, best.nit, out.theta_path, out.theta_next,
                     r.size, se, best.message)

