"""Out-of-sample forecasting, scoring, and identified impulse responses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .data import TimeSeriesPanel
from .drawstore import DrawStore
from .errors import EmptyRun, NonCompanionable

__all__ = [
    "ForecastModel",
    "ForecastRun",
    "IrfResult",
    "companion_matrix",
    "crps_from_draws",
    "irf",
    "recursive_forecast",
    "score",
]


class ForecastModel(Protocol):
    """Anything that can produce joint predictive draws from a data panel."""

    name: str

    def forecast_draws(
        self, panel: TimeSeriesPanel, max_horizon: int, rng: np.random.Generator
    ) -> np.ndarray:
        """Return draws of shape (ndraws, max_horizon, N) for steps 1..H."""
        ...


@dataclass(frozen=True)
class ForecastRun:
    """Predictive draws and realizations for a recursive exercise.

    draws[o][h-1] are the step-h predictive draws made at origin o using
    only data through that origin; realized entries are NaN where the
    evaluation sample ends.
    """

    model: str
    variables: tuple[str, ...]
    origins: tuple[str, ...]
    horizons: tuple[int, ...]
    draws: np.ndarray  # (n_origins, max_h, ndraws, N)
    realized: np.ndarray  # (n_origins, max_h, N)
    horizon_mode: str = "point"

    def horizon_slice(self, h: int) -> tuple[np.ndarray, np.ndarray]:
        """Draws and realizations for horizon h under the configured mode.

        "point" takes the step-h values; "average" averages steps 1..h
        (both sides), for the reading of an h-quarter-ahead forecast as a
        forecast of average growth.
        """
        if h not in self.horizons:
            raise ValueError(f"horizon {h} not in run")
        if self.horizon_mode == "point":
            return self.draws[:, h - 1], self.realized[:, h - 1]
        return self.draws[:, :h].mean(axis=1), self.realized[:, :h].mean(axis=1)


def recursive_forecast(
    model: ForecastModel,
    panel: TimeSeriesPanel,
    origins: list[str] | tuple[str, ...],
    horizons: tuple[int, ...] = (1, 2, 4),
    seed: int = 0,
    horizon_mode: str = "point",
) -> ForecastRun:
    """Fit the model at every origin on data through the origin only and
    iterate its predictive distribution forward."""
    if not origins:
        raise EmptyRun("no forecast origins")
    if horizon_mode not in ("point", "average"):
        raise ValueError("horizon_mode must be 'point' or 'average'")
    max_h = max(horizons)
    all_draws = []
    realized = []
    for i, origin in enumerate(origins):
        sub = panel.through(origin)
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        draws = model.forecast_draws(sub, max_h, rng)
        if draws.ndim != 3 or draws.shape[1] != max_h:
            raise ValueError("model returned draws with the wrong shape")
        all_draws.append(draws)
        pos = panel.dates.index(origin)
        real = np.full((max_h, panel.nvars), np.nan)
        for h in range(1, max_h + 1):
            if pos + h < panel.nrows:
                real[h - 1] = panel.values[pos + h]
        realized.append(real)
    draws_arr = np.stack([d.transpose(1, 0, 2) for d in all_draws])
    return ForecastRun(
        model=model.name,
        variables=panel.names,
        origins=tuple(origins),
        horizons=tuple(horizons),
        draws=draws_arr,
        realized=np.stack(realized),
        horizon_mode=horizon_mode,
    )


def crps_from_draws(draws: np.ndarray, realized: float) -> float:
    """Sample CRPS: mean |X - y| minus half the unbiased mean pairwise
    absolute difference of the draws."""
    x = np.sort(np.asarray(draws, dtype=float))
    m = x.size
    term1 = float(np.abs(x - realized).mean())
    if m < 2:
        return term1
    # sum_{i<j} (x_(j) - x_(i)) via the sorted-rank identity; centering
    # first makes the all-equal case land on exactly zero
    centered = x - x[0]
    ranks = np.arange(m)
    pair_sum = 2.0 * float(np.sum((2.0 * ranks - m + 1.0) * centered))
    return term1 - 0.5 * pair_sum / (m * (m - 1.0))


def score(run: ForecastRun) -> list[dict]:
    """RMSE and mean CRPS per variable and horizon."""
    rows = []
    for h in run.horizons:
        draws, realized = run.horizon_slice(h)
        for j, name in enumerate(run.variables):
            ok = ~np.isnan(realized[:, j])
            if not ok.any():
                raise EmptyRun(f"no realized values at horizon {h} for {name}")
            point = draws[ok, :, j].mean(axis=1)
            err = point - realized[ok, j]
            rmse = float(np.sqrt(np.mean(err**2)))
            crps = float(
                np.mean(
                    [crps_from_draws(draws[o, :, j], realized[o, j]) for o in np.flatnonzero(ok)]
                )
            )
            rows.append(
                {
                    "model": run.model,
                    "variable": name,
                    "horizon": h,
                    "rmse": rmse,
                    "crps": crps,
                    "n_origins": int(ok.sum()),
                }
            )
    return rows


def companion_matrix(phi_t: np.ndarray) -> np.ndarray:
    """Companion form of one period's coefficient block [c, B1', ..., Bp']'."""
    k, n = phi_t.shape
    if (k - 1) % n != 0:
        raise NonCompanionable(f"k={k} is not 1 + N*p for N={n}")
    p = (k - 1) // n
    comp = np.zeros((n * p, n * p))
    for lag in range(p):
        comp[:n, lag * n : (lag + 1) * n] = phi_t[1 + lag * n : 1 + (lag + 1) * n].T
    if p > 1:
        comp[n:, : n * (p - 1)] = np.eye(n * (p - 1))
    return comp


@dataclass(frozen=True)
class IrfResult:
    """Identified impulse responses per reference date and shock.

    responses has shape (n_dates, n_shocks, ndraws, H+1, N); bands holds
    the 10/50/90 quantiles over draws with shape (n_dates, n_shocks, 3,
    H+1, N).  Cumulated variables hold prefix sums of the level responses.
    """

    dates: tuple[int, ...]
    shocks: tuple[int, ...]
    variables: tuple[str, ...]
    horizons: int
    cumulative: tuple[bool, ...]
    responses: np.ndarray
    bands: np.ndarray = field(init=False)

    def __post_init__(self):
        q = np.quantile(self.responses, [0.1, 0.5, 0.9], axis=2)
        object.__setattr__(self, "bands", np.moveaxis(q, 0, 2))

    def band(self, date_idx: int, shock_idx: int, which: str = "median") -> np.ndarray:
        sel = {"q10": 0, "median": 1, "q90": 2}[which]
        return self.bands[date_idx, shock_idx, sel]


def irf(
    store: DrawStore,
    impact_provider: Callable[[int, int], np.ndarray],
    dates: list[int] | tuple[int, ...],
    horizons: int,
    shocks: tuple[int, ...] = (0,),
    cumulative: tuple[bool, ...] | None = None,
    variables: tuple[str, ...] | None = None,
) -> IrfResult:
    """Structural impulse responses from stored coefficient draws.

    At each reference date the coefficient block is held fixed over the
    horizon; the impact column comes from the theory's observable impact
    matrix evaluated per draw and date, and growth-rate variables are
    cumulated by prefix sums.
    """
    ndraws, T, k, n = store.phi.shape
    variables = variables or tuple(f"var_{i}" for i in range(n))
    cumulative = cumulative if cumulative is not None else tuple(False for _ in range(n))
    out = np.empty((len(dates), len(shocks), ndraws, horizons + 1, n))
    for di, t in enumerate(dates):
        if not 0 <= t < T:
            raise ValueError(f"reference date index {t} outside the sample")
        for d in range(ndraws):
            comp = companion_matrix(store.phi[d, t])
            impact = impact_provider(d, t)
            for si, s in enumerate(shocks):
                col = impact[:, s]
                state = np.zeros(comp.shape[0])
                state[:n] = col
                resp = np.empty((horizons + 1, n))
                resp[0] = col
                for h in range(1, horizons + 1):
                    state = comp @ state
                    resp[h] = state[:n]
                for j in range(n):
                    if cumulative[j]:
                        resp[:, j] = np.cumsum(resp[:, j])
                out[di, si, d] = resp
    return IrfResult(
        dates=tuple(dates),
        shocks=tuple(shocks),
        variables=variables,
        horizons=horizons,
        cumulative=cumulative,
        responses=out,
    )
