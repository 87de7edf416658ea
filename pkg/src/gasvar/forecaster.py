"""
Predictive distributions, VaR extraction and the rolling out-of-sample harness.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels
from .dist import DistParams, Family, quantile, uniforms
from .gas_filter import MIN_OBS, EstimationError, FitResult, GasModel, estimate, filter_path

__all__ = [
    "RollConfig",
    "RollError",
    "RollResult",
    "Window",
    "predict_h_step",
    "predict_one_step",
    "roll",
    "var_from_params",
]

logger = logging.getLogger(__name__)

MAX_EXPLODED_FRACTION = 1e-3
MAX_FAILED_REFIT_FRACTION = 0.05


class RollError(RuntimeError):
    pass


class Window(str, Enum):
    MOVING = "moving"
    RECURSIVE = "recursive"


@dataclass(frozen=True)
class RollConfig:
    """Settings of a rolling forecast exercise.

    ``forecast_length`` is the number of out-of-sample steps H; the in-sample
    length is ``len(returns) - forecast_length``.
    """

    forecast_length: int
    refit_every: int = 1
    window: Window = Window.MOVING
    horizon: int = 1
    var_levels: tuple[float, ...] = (0.01,)
    sim_draws: int = 10_000
    seed: int = 0
    min_obs: int = MIN_OBS

    def __post_init__(self) -> None:
        object.__setattr__(self, "window", Window(self.window))
        object.__setattr__(self, "var_levels", tuple(float(a) for a in self.var_levels))
        if self.forecast_length < 1:
            raise ValueError("forecast_length must be >= 1")
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.var_levels or not all(0.0 < a < 0.5 for a in self.var_levels):
            raise ValueError("var_levels must be non-empty with 0 < alpha < 0.5")


@dataclass
class RollResult:
    var_forecasts: np.ndarray
    pred_params: list[DistParams]
    realized: np.ndarray
    refit_indices: list[int]
    var_levels: tuple[float, ...]
    refit_windows: list[tuple[int, int]] = field(default_factory=list)
    failed_refits: list[int] = field(default_factory=list)
    fits: list[FitResult | None] = field(default_factory=list)

    @property
    def sigma(self) -> np.ndarray:
        return np.array([p.sigma for p in self.pred_params])


def var_from_params(p: DistParams, alpha: float) -> float:
    """VaR at level ``alpha``: the ``alpha``-quantile of the return distribution."""
    return float(quantile(alpha, p))


def _params_at(model: GasModel, theta: float) -> DistParams:
    return model.dist_params(math.exp(theta))


def predict_one_step(fit: FitResult, returns_tail) -> DistParams:
    """Closed-form one-step-ahead distribution after filtering ``returns_tail``."""
    out = filter_path(returns_tail, fit.model)
    return _params_at(fit.model, out.theta_next)


def predict_h_step(fit: FitResult, h: int, sim_draws: int = 10_000, seed: int = 0,
                   theta_next: float | None = None) -> np.ndarray:
    """Simulated returns ``h`` steps past the end of the fitted sample.

    Paths start from the one-step-ahead state (``fit.theta_next`` unless
    ``theta_next`` is given) and are advanced through the recursion.  The VaR
    at horizon ``h`` is the empirical quantile of the output.
    """
    if h < 2:
        raise ValueError("h = 1 has a closed form; use predict_one_step")
    if sim_draws < 1000:
        raise ValueError("sim_draws must be >= 1000")
    model = fit.model
    theta0 = fit.theta_next if theta_next is None else theta_next
    eps = quantile(uniforms(sim_draws * h, seed), model.innovation_params()).reshape(sim_draws, h)
    out = np.empty(sim_draws)
    _kernels.advance_many(theta0, eps, *model._kernel_args(), out)
    exploded = int(np.isnan(out).sum())
    if exploded > MAX_EXPLODED_FRACTION * sim_draws:
        raise RollError(f"{exploded} of {sim_draws} simulated paths exploded")
    if exploded:
        logger.warning("discarded %d explosive simulated paths", exploded)
    return out[~np.isnan(out)]


def _refit_schedule(n_total: int, cfg: RollConfig) -> list[tuple[int, int, int]]:
    """``(step, start, end)`` for each refit; the estimation window is ``returns[start:end]``."""
    n_in = n_total - cfg.forecast_length
    schedule = []
    for step in range(0, cfg.forecast_length, cfg.refit_every):
        end = n_in + step - (cfg.horizon - 1)
        start = max(0, end - n_in) if cfg.window is Window.MOVING else 0
        schedule.append((step, start, end))
    return schedule


def roll(returns, spec: Family, cfg: RollConfig, *, workers: int = 1) -> RollResult:
    """Rolling out-of-sample VaR forecasts.

    Step ``i`` targets ``returns[S + i]`` with ``S = len(returns) - H`` and
    only uses observations strictly before ``S + i - horizon + 1``.  Models are
    re-estimated every ``refit_every`` steps; in between, coefficients stay
    frozen while the filter runs through every new observation, always
    starting from the beginning of the last estimation window.

    ``workers`` parallelizes the independent refits; results do not depend on it.
    """
    family = Family(spec)
    r = np.ascontiguousarray(returns, dtype=float)
    n_total = r.size
    H = cfg.forecast_length
    if n_total <= H:
        raise ValueError(f"series length {n_total} must exceed forecast_length {H}")
    if n_total - H - (cfg.horizon - 1) < cfg.min_obs:
        raise ValueError(f"in-sample length {n_total - H} is below the estimation floor {cfg.min_obs}")

    schedule = _refit_schedule(n_total, cfg)

    def fit_window(item):
        _, start, end = item
        try:
            return estimate(r[start:end], family, min_obs=cfg.min_obs)
        except (EstimationError, ArithmeticError, ValueError) as exc:
            logger.warning("refit on [%d, %d) failed: %s", start, end, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            fits = list(pool.map(fit_window, schedule))
    else:
        fits = [fit_window(item) for item in schedule]

    failed = [step for (step, _, _), fit in zip(schedule, fits) if fit is None]
    if len(failed) > MAX_FAILED_REFIT_FRACTION * len(schedule):
        raise RollError(f"{len(failed)} of {len(schedule)} refits failed (steps {failed[:10]})")

    # failed refits reuse the previous window's coefficients and filter origin
    effective: list[tuple[FitResult, int]] = []
    last = None
    for (step, start, _), fit in zip(schedule, fits):
        if fit is not None:
            last = (fit, start)
        if last is None:
            raise RollError(f"initial refit at step {step} failed with no fallback")
        effective.append(last)

    levels = cfg.var_levels
    var_forecasts = np.empty((H, len(levels)))
    pred_params: list[DistParams] = []
    for i in range(H):
        fit, start = effective[i // cfg.refit_every]
        origin = n_total - H + i - (cfg.horizon - 1)
        out = filter_path(r[start:origin], fit.model)
        params = _params_at(fit.model, out.theta_next)
        pred_params.append(params)
        if cfg.horizon == 1:
            var_forecasts[i] = quantile(np.array(levels), params)
        else:
            sims = predict_h_step(fit, cfg.horizon, cfg.sim_draws, cfg.seed + i, theta_next=out.theta_next)
            var_forecasts[i] = np.quantile(sims, levels)

    return RollResult(
        var_forecasts=var_forecasts,
        pred_params=pred_params,
        realized=r[n_total - H:].copy(),
        refit_indices=[step for step, _, _ in schedule],
        var_levels=levels,
        refit_windows=[(start, end) for _, start, end in schedule],
        failed_refits=failed,
        fits=fits,
    )
