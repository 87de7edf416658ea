import math

import numpy as np
import pytest
from scipy import stats

from gasvar.dist import DistParams, Family
from gasvar.forecaster import (
    RollConfig,
    RollError,
    Window,
    predict_h_step,
    predict_one_step,
    roll,
    var_from_params,
)
from gasvar.gas_filter import FitResult, GasModel, estimate, filter_path, simulate_path

DGP = GasModel(Family.STD, -0.25, 0.06, 0.95, 0.0, 1.0, 7.0)


def _fit_for(model: GasModel, returns=None) -> FitResult:
    r = np.zeros(1) if returns is None else returns
    out = filter_path(r, model)
    return FitResult(model, out.loglik, True, 0, out.theta_path, out.theta_next, r.size)


class TestVar:
    def test_standard_normal(self):
        assert var_from_params(DistParams(Family.NORM, 0.0, 1.0), 0.05) == pytest.approx(-1.6448536269514722, abs=1e-12)

    def test_median_is_location(self):
        assert var_from_params(DistParams(Family.STD, 0.003, 0.02, 1.0, 5.0), 0.5) == pytest.approx(0.003, abs=1e-15)

    def test_skewed_reference(self):
        p = DistParams(Family.SSTD, 0.0, 0.02, 0.9, 6.0)
        assert var_from_params(p, 0.01) == pytest.approx(-0.054756536087494181731, rel=1e-10)


class TestPredict:
    def test_one_step_static(self):
        model = GasModel(Family.NORM, math.log(0.015), 0.0, 0.0, 0.001)
        p = predict_one_step(_fit_for(model), np.random.default_rng(0).standard_normal(40))
        assert p.sigma == pytest.approx(0.015, rel=1e-14) and p.mu == 0.001

    def test_one_step_matches_filter(self):
        r, _ = simulate_path(DGP, 400, 3)
        p = predict_one_step(_fit_for(DGP), r)
        assert p.sigma == math.exp(filter_path(r, DGP).theta_next)
        assert p.nu == DGP.nu

    def test_h_one_rejected(self):
        with pytest.raises(ValueError):
            predict_h_step(_fit_for(DGP), 1)

    def test_few_draws_rejected(self):
        with pytest.raises(ValueError):
            predict_h_step(_fit_for(DGP), 2, sim_draws=10)

    def test_static_h_step_matches_closed_form(self):
        model = GasModel(Family.NORM, math.log(0.01), 0.0, 0.0)
        sims = predict_h_step(_fit_for(model), 5, sim_draws=200_000, seed=1)
        assert np.quantile(sims, 0.05) == pytest.approx(0.01 * stats.norm.ppf(0.05), rel=0.02)
        assert stats.kstest(sims / 0.01, "norm").pvalue > 1e-3

    def test_seed_stability(self):
        r, _ = simulate_path(DGP, 500, 4)
        fit = _fit_for(DGP, r)
        a = np.quantile(predict_h_step(fit, 3, 50_000, seed=1), 0.01)
        b = np.quantile(predict_h_step(fit, 3, 50_000, seed=2), 0.01)
        assert abs(a - b) / abs(a) < 0.05
        assert np.array_equal(predict_h_step(fit, 3, 2000, seed=5), predict_h_step(fit, 3, 2000, seed=5))

    def test_h_step_wider_than_one_step_when_volatile(self):
        # starting far above the long-run level, dispersion decays towards it
        fit = _fit_for(DGP)
        high = DGP.unconditional_theta + 1.0
        sims = predict_h_step(fit, 20, 20_000, seed=0, theta_next=high)
        assert sims.std() < math.exp(high)

    def test_explosive_paths(self):
        model = GasModel(Family.NORM, 0.0, 40.0, 0.99)
        with pytest.raises(RollError):
            predict_h_step(_fit_for(model), 50, 1000, seed=0, theta_next=5.0)


@pytest.fixture(scope="module")
def series():
    return simulate_path(DGP, 330, 12)[0]


class TestRoll:
    def test_single_refit(self, series):
        cfg = RollConfig(forecast_length=30, refit_every=30, var_levels=(0.01, 0.05))
        res = roll(series, Family.NORM, cfg)
        assert res.refit_indices == [0]
        assert res.refit_windows == [(0, 300)]
        assert res.var_forecasts.shape == (30, 2)
        assert np.all(res.var_forecasts[:, 0] < res.var_forecasts[:, 1])
        assert np.array_equal(res.realized, series[300:])

    def test_matches_manual_oracle(self, series):
        cfg = RollConfig(forecast_length=9, refit_every=3, var_levels=(0.05,))
        res = roll(series, Family.STD, cfg)
        S = series.size - 9
        for i in range(9):
            step = 3 * (i // 3)
            fit = estimate(series[step:S + step], Family.STD)
            theta = filter_path(series[step:S + i], fit.model).theta_next
            expected = var_from_params(fit.model.dist_params(math.exp(theta)), 0.05)
            assert res.var_forecasts[i, 0] == pytest.approx(expected, rel=1e-12)

    def test_no_look_ahead(self, series):
        cfg = RollConfig(forecast_length=20, refit_every=5, var_levels=(0.01,))
        base = roll(series, Family.NORM, cfg).var_forecasts
        k = 7
        S = series.size - 20
        corrupted = series.copy()
        corrupted[S + k:] = -0.05
        again = roll(corrupted, Family.NORM, cfg).var_forecasts
        assert np.array_equal(base[: k + 1], again[: k + 1])
        assert not np.array_equal(base[k + 1:], again[k + 1:])

    def test_workers_bit_identical(self, series):
        cfg = RollConfig(forecast_length=12, refit_every=2, var_levels=(0.01, 0.05))
        a = roll(series, Family.SSTD, cfg, workers=1)
        b = roll(series, Family.SSTD, cfg, workers=6)
        assert a.var_forecasts.tobytes() == b.var_forecasts.tobytes()

    @pytest.mark.parametrize("window", [Window.MOVING, Window.RECURSIVE])
    def test_window_bookkeeping(self, series, window):
        cfg = RollConfig(forecast_length=10, refit_every=4, window=window)
        res = roll(series, Family.NORM, cfg)
        S = series.size - 10
        assert res.refit_indices == [0, 4, 8]
        starts = [0, 4, 8] if window is Window.MOVING else [0, 0, 0]
        assert res.refit_windows == [(s0, S + st) for s0, st in zip(starts, [0, 4, 8])]

    def test_multi_step_horizon(self, series):
        cfg = RollConfig(forecast_length=4, refit_every=4, horizon=3, var_levels=(0.05,), sim_draws=5000)
        res = roll(series, Family.NORM, cfg)
        S = series.size - 4
        assert res.refit_windows == [(0, S - 2)]
        assert np.all(np.isfinite(res.var_forecasts)) and np.all(res.var_forecasts < 0)

    def test_too_short(self):
        with pytest.raises(ValueError):
            roll(np.zeros(150), Family.NORM, RollConfig(forecast_length=60))

    def test_failed_refits_raise(self):
        r = np.zeros(300)
        with pytest.raises(RollError):
            roll(r, Family.NORM, RollConfig(forecast_length=20, refit_every=5))

    @pytest.mark.parametrize("kwargs", [dict(forecast_length=0), dict(forecast_length=5, refit_every=0),
                                        dict(forecast_length=5, var_levels=(0.7,))])
    def test_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            RollConfig(**kwargs)
