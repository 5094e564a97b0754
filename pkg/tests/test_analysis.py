import numpy as np
import pytest

from tctvp.analysis import (
    IrfResult,
    companion_matrix,
    crps_from_draws,
    irf,
    recursive_forecast,
    score,
)
from tctvp.blockband import BlockTridiag
from tctvp.data import TimeSeriesPanel, period_range
from tctvp.drawstore import DrawStore
from tctvp.errors import NonCompanionable
from tctvp.forecasters import FlatVarForecaster
from tctvp.sampler import ChainConfig


def make_panel(values, pre_sample=0):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1:
        values = values.T
    t, n = values.shape
    return TimeSeriesPanel(
        dates=tuple(period_range("1990Q1", t)),
        values=values,
        names=tuple(f"v{i}" for i in range(n)),
        pre_sample=pre_sample,
    )


class DeterministicAr1:
    """rho^h * y_T forecaster with no noise, for the exactness check."""

    name = "det-ar1"

    def __init__(self, rho, ndraws=7):
        self.rho = rho
        self.ndraws = ndraws

    def forecast_draws(self, panel, max_horizon, rng):
        y_last = panel.values[-1]
        out = np.empty((self.ndraws, max_horizon, panel.nvars))
        for h in range(max_horizon):
            out[:, h, :] = self.rho ** (h + 1) * y_last
        return out


class TestRecursiveForecast:
    def test_deterministic_ar1_exact(self):
        rho = 0.6
        y = rho ** np.arange(10)
        panel = make_panel(y)
        run = recursive_forecast(DeterministicAr1(rho), panel, [panel.dates[5]], (1, 2, 4))
        for h in (1, 2, 4):
            draws, realized = run.horizon_slice(h)
            np.testing.assert_allclose(draws, rho ** (5 + 1 + h - 1), atol=1e-14)
            assert realized[0, 0] == pytest.approx(y[5 + h])

    def test_no_lookahead(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((40, 2))
        panel = make_panel(values, pre_sample=10)
        origin = panel.dates[30]
        model = FlatVarForecaster(p=1, ndraws=50)
        run1 = recursive_forecast(model, panel, [origin], (1, 2), seed=3)
        tampered = values.copy()
        tampered[31:] = 99.0
        panel2 = make_panel(tampered, pre_sample=10)
        run2 = recursive_forecast(model, panel2, [origin], (1, 2), seed=3)
        np.testing.assert_array_equal(run1.draws, run2.draws)

    def test_flat_var_rmse_near_innovation_sd(self):
        rng = np.random.default_rng(1)
        T, sd = 400, 0.5
        y = np.empty(T)
        y[0] = 0.0
        for t in range(1, T):
            y[t] = 0.8 * y[t - 1] + sd * rng.standard_normal()
        panel = make_panel(y, pre_sample=20)
        origins = list(panel.dates[300:380])
        model = FlatVarForecaster(p=1, ndraws=300)
        run = recursive_forecast(model, panel, origins, (1,), seed=5)
        table = score(run)
        assert table[0]["rmse"] == pytest.approx(sd, rel=0.15)

    def test_average_horizon_mode(self):
        rho = 0.5
        y = rho ** np.arange(12)
        panel = make_panel(y)
        run = recursive_forecast(
            DeterministicAr1(rho), panel, [panel.dates[4]], (1, 4), horizon_mode="average"
        )
        draws, realized = run.horizon_slice(4)
        expect = np.mean([rho ** (4 + 1 + h) for h in range(4)])
        np.testing.assert_allclose(draws, expect, atol=1e-14)
        np.testing.assert_allclose(realized[0, 0], np.mean(y[5:9]))


class TestCrps:
    def test_perfect_forecast_zero(self):
        assert crps_from_draws(np.full(100, 1.3), 1.3) == 0.0

    def test_degenerate_forecast_absolute_error(self):
        assert crps_from_draws(np.full(50, 2.0), 0.5) == pytest.approx(1.5)

    def test_gaussian_closed_form(self):
        rng = np.random.default_rng(2)
        draws = rng.standard_normal(100_000)
        target = (np.sqrt(2.0) - 1.0) / np.sqrt(np.pi)
        assert crps_from_draws(draws, 0.0) == pytest.approx(target, rel=0.01)

    def test_nonnegative_and_permutation_invariant(self):
        rng = np.random.default_rng(3)
        draws = rng.standard_normal(400)
        val = crps_from_draws(draws, 0.7)
        assert val >= 0.0
        assert crps_from_draws(draws[::-1], 0.7) == pytest.approx(val, abs=1e-12)

    def test_matches_naive_double_loop(self):
        rng = np.random.default_rng(4)
        draws = rng.standard_normal(200)
        y = 0.3
        naive = np.abs(draws - y).mean() - 0.5 * np.abs(
            draws[:, None] - draws[None, :]
        ).sum() / (200 * 199)
        assert crps_from_draws(draws, y) == pytest.approx(naive, abs=1e-12)


def toy_store(phi_draws):
    ndraws, T, k, n = phi_draws.shape
    return DrawStore(
        phi=phi_draws,
        sigma_u=np.tile(np.eye(n), (ndraws, 1, 1)),
        lam=np.ones(ndraws),
        gamma=np.zeros(ndraws),
        theta=np.zeros((ndraws, 0)),
        log_ml=np.zeros(ndraws),
    )


class TestIrf:
    def test_zero_coefficients_give_impact_only(self):
        ndraws, T, n, p = 3, 5, 2, 1
        phi = np.zeros((ndraws, T, 1 + n * p, n))
        store = toy_store(phi)
        impact = np.array([[0.5, 0.0], [0.2, 0.9]])
        res = irf(store, lambda d, t: impact, dates=[2], horizons=4, shocks=(0, 1))
        np.testing.assert_allclose(res.responses[0, 0, :, 0, :], np.tile(impact[:, 0], (3, 1)))
        np.testing.assert_allclose(res.responses[0, 0, :, 1:, :], 0.0, atol=1e-14)

    def test_ar1_propagation_and_cumulation(self):
        ndraws, T, n = 2, 4, 1
        phi = np.zeros((ndraws, T, 2, 1))
        phi[:, :, 1, 0] = 0.5
        store = toy_store(phi)
        res = irf(
            store,
            lambda d, t: np.array([[2.0]]),
            dates=[1],
            horizons=3,
            cumulative=(True,),
        )
        np.testing.assert_allclose(
            res.responses[0, 0, 0, :, 0], 2.0 * np.cumsum(0.5 ** np.arange(4))
        )

    def test_linearity_in_impact(self):
        rng = np.random.default_rng(5)
        ndraws, T, n, p = 2, 3, 2, 2
        phi = 0.1 * rng.standard_normal((ndraws, T, 1 + n * p, n))
        store = toy_store(phi)
        impact = rng.standard_normal((n, n))
        base = irf(store, lambda d, t: impact, dates=[2], horizons=5)
        scaled = irf(store, lambda d, t: 3.0 * impact, dates=[2], horizons=5)
        np.testing.assert_allclose(scaled.responses, 3.0 * base.responses, atol=1e-12)

    def test_non_companionable(self):
        phi = np.zeros((1, 2, 4, 2))  # k=4 but 1 + 2p is odd
        store = toy_store(phi)
        with pytest.raises(NonCompanionable):
            irf(store, lambda d, t: np.eye(2), dates=[0], horizons=2)

    def test_bands_are_ordered(self):
        rng = np.random.default_rng(6)
        phi = 0.2 * rng.standard_normal((40, 3, 3, 1))
        phi[:, :, 0, 0] = 0.0
        store = toy_store(phi)
        res = irf(store, lambda d, t: np.array([[1.0]]), dates=[1], horizons=4)
        assert np.all(res.band(0, 0, "q10") <= res.band(0, 0, "median") + 1e-12)
        assert np.all(res.band(0, 0, "median") <= res.band(0, 0, "q90") + 1e-12)
