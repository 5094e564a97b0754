"""Forecast-model adapters: one thin wrapper per estimator.

Each wrapper owns its estimation settings, refits from scratch on the
panel it is handed (so recursive exercises never leak future data), and
returns joint predictive draws by iterating the fitted system forward.
Time-varying-coefficient models evolve their coefficients under the
estimated law of motion by default; ``freeze`` pins them at the final
estimate instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky as _dense_chol

from .baselines import (
    ConstantVarPosterior,
    MinnesotaSpec,
    StdTvpSpec,
    fit_flat_var,
    fit_minnesota,
    fit_std_tvpvar,
)
from .data import TimeSeriesPanel
from .posterior import build_design
from .prior import presample_statistics
from .sampler import ChainConfig, HyperPrior, PriorInputs, ThetaPrior, run_chain

__all__ = [
    "FlatVarForecaster",
    "MinnesotaForecaster",
    "StdTvpForecaster",
    "TcTvpForecaster",
]


def _iterate_constant(pi, sigma, history, max_h, rng):
    n = sigma.shape[0]
    p = history.shape[0]
    chol = _dense_chol(sigma, lower=True)
    hist = history.copy()
    out = np.empty((max_h, n))
    for h in range(max_h):
        x = np.concatenate([[1.0], hist[::-1].ravel()])
        out[h] = x @ pi + chol @ rng.standard_normal(n)
        hist = np.vstack([hist[1:], out[h]]) if p > 1 else out[h][None, :]
    return out


@dataclass
class FlatVarForecaster:
    p: int
    ndraws: int = 500
    name: str = "var-flat"

    def forecast_draws(self, panel: TimeSeriesPanel, max_horizon: int, rng):
        design = build_design(panel, self.p)
        post = fit_flat_var(design)
        return _constant_var_draws(post, panel, self.p, max_horizon, self.ndraws, rng)


@dataclass
class MinnesotaForecaster:
    p: int
    tightness: float = 0.1
    ndraws: int = 500
    name: str = "bvar-minnesota"

    def forecast_draws(self, panel: TimeSeriesPanel, max_horizon: int, rng):
        design = build_design(panel, self.p)
        spec = MinnesotaSpec.from_presample(
            panel.presample_values(), self.p, panel.nonstationary, self.tightness
        )
        post = fit_minnesota(design, spec, self.p)
        return _constant_var_draws(post, panel, self.p, max_horizon, self.ndraws, rng)


def _constant_var_draws(
    post: ConstantVarPosterior, panel, p, max_horizon, ndraws, rng
) -> np.ndarray:
    history = panel.values[-p:]
    out = np.empty((ndraws, max_horizon, panel.nvars))
    for d in range(ndraws):
        sigma, pi = post.sample(rng)
        out[d] = _iterate_constant(pi, sigma, history, max_horizon, rng)
    return out


@dataclass
class StdTvpForecaster:
    p: int
    cfg: ChainConfig
    freeze: bool = False
    name: str = "tvp-standard"

    def forecast_draws(self, panel: TimeSeriesPanel, max_horizon: int, rng):
        design = build_design(panel, self.p)
        spec = StdTvpSpec.from_presample(panel.presample_values(), self.p)
        store = fit_std_tvpvar(design, spec, self.cfg)
        n, k = panel.nvars, design.k
        history = panel.values[-self.p :]
        out = np.empty((store.ndraws, max_horizon, n))
        for d in range(store.ndraws):
            phi = store.phi[d, -1].copy()
            sigma = store.sigma_u[d]
            omega_sd = np.sqrt(store.theta[d]).reshape(n, k).T
            chol = _dense_chol(sigma, lower=True)
            hist = history.copy()
            for h in range(max_horizon):
                if not self.freeze:
                    phi = phi + omega_sd * rng.standard_normal((k, n))
                x = np.concatenate([[1.0], hist[::-1].ravel()])
                y_next = x @ phi + chol @ rng.standard_normal(n)
                out[d, h] = y_next
                hist = np.vstack([hist[1:], y_next]) if self.p > 1 else y_next[None, :]
        return out


@dataclass
class TcTvpForecaster:
    """Forecasts from the theory-weighted TVP-VAR.

    ``moments_builder(theta, periods)`` must return the per-period theory
    moments for an effective sample of that length; hyper-parameters and
    deep parameters are sampled unless pinned.
    """

    p: int
    cfg: ChainConfig
    moments_builder: "callable"
    theta_prior: ThetaPrior | None = None
    hyper_prior: HyperPrior | None = None
    fix_lam: float | None = None
    fix_gamma: float | None = None
    fixed_theta: np.ndarray | None = None
    freeze: bool = False
    name: str = "tvp-theory"
    presample_ar_order: int = 4

    def fit(self, panel: TimeSeriesPanel):
        design = build_design(panel, self.p)
        scale, dof, p1, phi0 = presample_statistics(
            panel.presample_values(), self.p, self.presample_ar_order
        )
        inputs = PriorInputs(phi0=phi0, scale=scale, dof=dof, first_block_precision=p1)
        periods = design.periods

        def moments_fn(theta):
            return self.moments_builder(theta, periods)

        store = run_chain(
            design,
            moments_fn,
            self.theta_prior,
            inputs,
            self.cfg,
            hyper_prior=self.hyper_prior,
            fix_lam=self.fix_lam,
            fix_gamma=self.fix_gamma,
            fixed_theta=self.fixed_theta,
        )
        return store, design

    def forecast_draws(self, panel: TimeSeriesPanel, max_horizon: int, rng):
        store, design = self.fit(panel)
        n, k = panel.nvars, design.k
        history = panel.values[-self.p :]
        out = np.empty((store.ndraws, max_horizon, n))
        for d in range(store.ndraws):
            phi = store.phi[d, -1].copy()
            sigma = store.sigma_u[d]
            lam = store.lam[d]
            chol = _dense_chol(sigma, lower=True)
            hist = history.copy()
            for h in range(max_horizon):
                if not self.freeze:
                    phi = phi + (rng.standard_normal((k, n)) @ chol.T) / lam
                x = np.concatenate([[1.0], hist[::-1].ravel()])
                y_next = x @ phi + chol @ rng.standard_normal(n)
                out[d, h] = y_next
                hist = np.vstack([hist[1:], y_next]) if self.p > 1 else y_next[None, :]
        return out
