"""Observable state-space bundle and simulation from it."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from ..errors import NonStationary
from .gensys import ReSolution, spectral_radius

STATIONARITY_TOL = 1e-9


@dataclass(frozen=True)
class StateSpaceSolution:
    """Per-period linear state-space model for the observables.

    y_t = d + b s_t + v_t,   s_t = c_path[t] + t_path[t] s_{t-1} + r_path[t] eps_t

    with eps_t ~ N(0, diag(shock_var)) and v_t ~ N(0, diag(meas_var[t])).
    ``baseline`` holds the constant-coefficient solution in force outside
    any announcement window (and before period 0).
    """

    d: np.ndarray  # (N,)
    b: np.ndarray  # (N, ns)
    c_path: np.ndarray  # (T, ns)
    t_path: np.ndarray  # (T, ns, ns)
    r_path: np.ndarray  # (T, ns, neps)
    shock_var: np.ndarray  # (neps,) variances
    meas_var: np.ndarray  # (T, N) variances
    baseline: ReSolution

    def __post_init__(self):
        if np.any(self.shock_var < 0.0):
            raise ValueError("shock variances must be nonnegative")
        if np.any(self.meas_var < 0.0):
            raise ValueError("measurement variances must be nonnegative")

    @property
    def periods(self) -> int:
        return self.c_path.shape[0]

    @property
    def nstates(self) -> int:
        return self.b.shape[1]

    @property
    def nobs_vars(self) -> int:
        return self.b.shape[0]

    @property
    def nshocks(self) -> int:
        return self.shock_var.shape[0]

    def is_constant(self) -> bool:
        return bool(
            np.all(self.c_path == 0.0)
            and np.all(self.t_path == self.baseline.transition)
            and np.all(self.r_path == self.baseline.impact)
        )

    @staticmethod
    def constant(
        d: np.ndarray,
        b: np.ndarray,
        baseline: ReSolution,
        shock_var: np.ndarray,
        periods: int,
        meas_var: np.ndarray | None = None,
    ) -> "StateSpaceSolution":
        ns = baseline.nstates
        n = b.shape[0]
        if meas_var is None:
            meas_var = np.zeros((periods, n))
        return StateSpaceSolution(
            d=np.asarray(d, dtype=float),
            b=np.asarray(b, dtype=float),
            c_path=np.zeros((periods, ns)),
            t_path=np.tile(baseline.transition, (periods, 1, 1)),
            r_path=np.tile(baseline.impact, (periods, 1, 1)),
            shock_var=np.asarray(shock_var, dtype=float),
            meas_var=np.asarray(meas_var, dtype=float),
            baseline=baseline,
        )

    def impact_matrix(self, t: int) -> np.ndarray:
        """Observable impact of one-standard-deviation structural shocks at t."""
        return self.b @ self.r_path[t] @ np.diag(np.sqrt(self.shock_var))


def stationary_moments(sol: StateSpaceSolution | ReSolution, shock_var=None):
    """Stationary state covariance and mean of the baseline law.

    Solves sigma = T sigma T' + R Omega R' and m = (I - T)^{-1} C; raises
    NonStationary when the transition's spectral radius reaches one.
    """
    if isinstance(sol, StateSpaceSolution):
        base = sol.baseline
        omega = np.diag(sol.shock_var)
    else:
        base = sol
        if shock_var is None:
            raise ValueError("shock variances required with a bare solution")
        omega = np.diag(np.asarray(shock_var, dtype=float))
    rho = spectral_radius(base.transition)
    if rho >= 1.0 - STATIONARITY_TOL:
        raise NonStationary(f"spectral radius {rho:.6f} is not strictly below one")
    q = base.impact @ omega @ base.impact.T
    sigma = solve_discrete_lyapunov(base.transition, q)
    sigma = 0.5 * (sigma + sigma.T)
    mean = np.linalg.solve(np.eye(base.nstates) - base.transition, base.const)
    return sigma, mean


def simulate(
    sol: StateSpaceSolution,
    rng: np.random.Generator,
    init_state: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one sample path of (observables, states) of length ``periods``.

    The initial state is drawn from the baseline stationary distribution
    unless given.
    """
    T, ns, n = sol.periods, sol.nstates, sol.nobs_vars
    if init_state is None:
        sigma, mean = stationary_moments(sol)
        vals, vecs = np.linalg.eigh(sigma)
        root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None)))
        state = mean + root @ rng.standard_normal(ns)
    else:
        state = np.asarray(init_state, dtype=float).copy()
    shock_sd = np.sqrt(sol.shock_var)
    y = np.empty((T, n))
    s = np.empty((T, ns))
    for t in range(T):
        eps = shock_sd * rng.standard_normal(sol.nshocks)
        state = sol.c_path[t] + sol.t_path[t] @ state + sol.r_path[t] @ eps
        noise = np.sqrt(sol.meas_var[t]) * rng.standard_normal(n)
        y[t] = sol.d + sol.b @ state + noise
        s[t] = state
    return y, s
