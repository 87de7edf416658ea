"""
VaR backtests: hit series, AE ratio, Kupiec UC, Christoffersen CC,
Engle-Manganelli DQ, quantile loss and absolute deviation.

A hit (violation) is ``realized < VaR``; ties are not hits.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

__all__ = [
    "BacktestReport",
    "HitSeries",
    "TestResult",
    "absolute_deviation",
    "ae_ratio",
    "backtest",
    "chi2_pvalue",
    "christoffersen_cc",
    "dq_test",
    "hit_series",
    "kupiec_uc",
    "ql_ratio",
    "quantile_loss",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HitSeries:
    hits: np.ndarray
    alpha: float

    @property
    def length(self) -> int:
        return int(self.hits.size)

    @property
    def count(self) -> int:
        return int(self.hits.sum())


@dataclass(frozen=True)
class TestResult:
    stat: float
    pvalue: float
    rank_deficient: bool = False


@dataclass(frozen=True)
class BacktestReport:
    alpha: float
    n: int
    hits: int
    ae: float
    uc: TestResult
    cc: TestResult
    dq: TestResult
    ql_series: np.ndarray
    ql_mean: float
    ad_mean: float
    ad_max: float

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "hits": self.hits,
            "ae": self.ae,
            "uc": {"stat": self.uc.stat, "pvalue": self.uc.pvalue},
            "cc": {"stat": self.cc.stat, "pvalue": self.cc.pvalue},
            "dq": asdict(self.dq),
            "ql": {"mean": self.ql_mean},
            "ad": {"mean": self.ad_mean, "max": self.ad_max},
        }


def _pair(realized, var_forecasts) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(realized, dtype=float).ravel()
    v = np.asarray(var_forecasts, dtype=float).ravel()
    if y.size != v.size:
        raise ValueError(f"length mismatch: {y.size} realized vs {v.size} VaR forecasts")
    if y.size == 0:
        raise ValueError("empty series")
    return y, v


def chi2_pvalue(stat: float, df: int) -> float:
    """Upper-tail chi-square probability (regularized upper incomplete gamma)."""
    return float(special.gammaincc(0.5 * df, 0.5 * max(stat, 0.0)))


def hit_series(realized, var_forecasts, alpha: float) -> HitSeries:
    y, v = _pair(realized, var_forecasts)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    return HitSeries((y < v).astype(np.int64), float(alpha))


def ae_ratio(h: HitSeries) -> float:
    return h.count / (h.alpha * h.length)


def _bernoulli_loglik(n0: int, n1: int, p: float) -> float:
    return float(special.xlogy(n0, 1.0 - p) + special.xlogy(n1, p))


def kupiec_uc(h: HitSeries) -> TestResult:
    n = h.length
    x = h.count
    stat = -2.0 * (_bernoulli_loglik(n - x, x, h.alpha) - _bernoulli_loglik(n - x, x, x / n))
    stat = stat if stat > 0.0 else 0.0
    return TestResult(stat, chi2_pvalue(stat, 1))


def _lr_independence(hits: np.ndarray) -> float:
    prev, cur = hits[:-1], hits[1:]
    n01 = int(np.sum((prev == 0) & (cur == 1)))
    n00 = int(np.sum((prev == 0) & (cur == 0)))
    n11 = int(np.sum((prev == 1) & (cur == 1)))
    n10 = int(np.sum((prev == 1) & (cur == 0)))
    pi01 = n01 / (n00 + n01) if n00 + n01 else 0.0
    pi11 = n11 / (n10 + n11) if n10 + n11 else 0.0
    pi = (n01 + n11) / (n00 + n01 + n10 + n11)
    restricted = _bernoulli_loglik(n00 + n10, n01 + n11, pi)
    unrestricted = _bernoulli_loglik(n00, n01, pi01) + _bernoulli_loglik(n10, n11, pi11)
    stat = -2.0 * (restricted - unrestricted)
    return stat if stat > 0.0 else 0.0


def christoffersen_cc(h: HitSeries) -> TestResult:
    """Conditional coverage: Kupiec LR plus first-order Markov independence LR, chi2(2)."""
    if h.length < 2:
        raise ValueError("conditional coverage needs at least 2 observations")
    stat = kupiec_uc(h).stat + _lr_independence(h.hits)
    return TestResult(stat, chi2_pvalue(stat, 2))


def dq_test(h: HitSeries, var_forecasts, lags: int = 4) -> TestResult:
    """Dynamic quantile test.

    Regresses ``hit_t = d_t - alpha`` on a constant, ``lags`` lagged values of
    itself and the contemporaneous VaR, over ``t = lags .. H-1``.  The statistic
    ``b' X'X b / (alpha (1 - alpha))`` is chi-square with ``lags + 2`` degrees
    of freedom.  A rank-deficient design (e.g. no hits) is solved by
    pseudo-inverse and flagged.
    """
    v = np.asarray(var_forecasts, dtype=float).ravel()
    n = h.length
    if v.size != n:
        raise ValueError(f"length mismatch: {n} hits vs {v.size} VaR forecasts")
    if n <= lags + 2:
        raise ValueError(f"DQ test needs more than {lags + 2} observations, got {n}")
    hit = h.hits - h.alpha
    y = hit[lags:]
    cols = [np.ones(n - lags)]
    cols += [hit[lags - k : n - k] for k in range(1, lags + 1)]
    cols.append(v[lags:])
    X = np.column_stack(cols)
    rank = np.linalg.matrix_rank(X)
    deficient = bool(rank < X.shape[1])
    if deficient:
        logger.info("DQ design matrix rank %d < %d; using pseudo-inverse", rank, X.shape[1])
    beta = np.linalg.pinv(X) @ y
    fitted = X @ beta
    stat = float(fitted @ fitted) / (h.alpha * (1.0 - h.alpha))
    return TestResult(stat, chi2_pvalue(stat, lags + 2), deficient)


def quantile_loss(realized, var_forecasts, alpha: float) -> tuple[np.ndarray, float]:
    y, v = _pair(realized, var_forecasts)
    d = (y < v).astype(float)
    series = (alpha - d) * (y - v)
    return series, float(series.mean())


def ql_ratio(mean_a: float, mean_b: float) -> float:
    if not mean_b > 0.0:
        raise ZeroDivisionError(f"baseline quantile loss must be positive, got {mean_b}")
    return mean_a / mean_b


def absolute_deviation(realized, var_forecasts, h: HitSeries) -> tuple[float, float]:
    """Mean and max of ``|r - VaR|`` over violation instants; ``(0, 0)`` without violations."""
    y, v = _pair(realized, var_forecasts)
    dev = np.abs(y - v)[h.hits == 1]
    if dev.size == 0:
        return 0.0, 0.0
    return float(dev.mean()), float(dev.max())


def backtest(realized, var_forecasts, alpha: float, lags: int = 4) -> BacktestReport:
    y, v = _pair(realized, var_forecasts)
    h = hit_series(y, v, alpha)
    ql, ql_mean = quantile_loss(y, v, alpha)
    ad_mean, ad_max = absolute_deviation(y, v, h)
    return BacktestReport(
        alpha=float(alpha),
        n=h.length,
        hits=h.count,
        ae=ae_ratio(h),
        uc=kupiec_uc(h),
        cc=christoffersen_cc(h),
        dq=dq_test(h, v, lags),
        ql_series=ql,
        ql_mean=ql_mean,
        ad_mean=ad_mean,
        ad_max=ad_max,
    )
