"""Population moments of the lagged-regressor blocks implied by a solution.

The coefficient prior needs, for every sample period t, the non-central
second moments of x_t = [1, y_{t-1}', ..., y_{t-p}']' and y_t under the
theory.  These follow from the joint first and second moments of the
last p+1 states, which are propagated through the (possibly time-varying)
transition path after initializing at the stationary baseline moments.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingularGamma
from ..prior import TheoryMoments
from .solution import StateSpaceSolution, stationary_moments

PD_RELATIVE_TOL = 1e-10
PD_JITTER = 1e-8


def _ensure_pd(mat: np.ndarray, t: int) -> np.ndarray:
    """Symmetrize and enforce positive definiteness with one jitter retry."""
    sym = 0.5 * (mat + mat.T)
    k = sym.shape[0]
    floor = PD_RELATIVE_TOL * np.trace(sym) / k
    smallest = np.linalg.eigvalsh(sym)[0]
    if smallest >= floor:
        return sym
    jittered = sym + PD_JITTER * np.eye(k)
    if np.linalg.eigvalsh(jittered)[0] >= floor:
        return jittered
    raise SingularGamma(
        f"regressor moment matrix at period {t} is numerically singular "
        f"(min eigenvalue {smallest:.3e})"
    )


def theory_moments(sol: StateSpaceSolution, p: int, periods: int | None = None) -> TheoryMoments:
    """Per-period moment blocks for a lag-p regression on the observables.

    Measurement variance enters every contemporaneous y-block (the lag
    blocks of E[x x'] and E[y y'] itself) but never the cross blocks,
    since measurement errors are serially independent.
    """
    if periods is None:
        periods = sol.periods
    if periods > sol.periods:
        raise ValueError("not enough per-period laws for the requested sample")
    ns, n = sol.nstates, sol.nobs_vars
    k = 1 + n * p
    omega = np.diag(sol.shock_var)

    sigma0, mean0 = stationary_moments(sol)
    base_t = sol.baseline.transition

    # Joint moments of the stacked window (s_t, s_{t-1}, ..., s_{t-p}):
    # initialize at the stationary cross-moments, then roll forward with
    # the per-period law.
    w = p + 1
    mean = np.tile(mean0, w)
    cov = np.empty((w * ns, w * ns))
    lagpow = [np.linalg.matrix_power(base_t, h) for h in range(w)]
    for i in range(w):
        for j in range(w):
            # Cov(s_{t-i}, s_{t-j}) = T^{j-i} Sigma for j >= i
            block = lagpow[j - i] @ sigma0 if j >= i else (lagpow[i - j] @ sigma0).T
            cov[i * ns : (i + 1) * ns, j * ns : (j + 1) * ns] = block

    gamma_xx = np.empty((periods, k, k))
    gamma_xy = np.empty((periods, k, n))
    gamma_yy = np.empty((periods, n, n))
    mean_y = np.empty((periods, n))

    shift = np.zeros((w * ns, w * ns))
    for i in range(1, w):
        shift[i * ns : (i + 1) * ns, (i - 1) * ns : i * ns] = np.eye(ns)

    for t in range(periods):
        # advance the window: s_t = C_t + T_t s_{t-1} + R_t eps_t
        trans = shift.copy()
        trans[:ns, :ns] = 0.0
        trans[:ns, :ns] = sol.t_path[t]
        # note: rows 0 map from previous window's block 0 (s_{t-1})
        new_mean = trans @ mean
        new_mean[:ns] += sol.c_path[t]
        rq = sol.r_path[t] @ omega @ sol.r_path[t].T
        new_cov = trans @ cov @ trans.T
        new_cov[:ns, :ns] += rq
        mean, cov = new_mean, 0.5 * (new_cov + new_cov.T)

        # observable means and second moments over the window
        mu = np.array([sol.d + sol.b @ mean[i * ns : (i + 1) * ns] for i in range(w)])
        second = np.empty((w, w, n, n))
        for i in range(w):
            for j in range(w):
                blk = cov[i * ns : (i + 1) * ns, j * ns : (j + 1) * ns]
                second[i, j] = sol.b @ blk @ sol.b.T + np.outer(mu[i], mu[j])

        def meas_at(lag: int) -> np.ndarray:
            idx = t - lag
            if idx < 0:
                return np.zeros(n)
            return sol.meas_var[idx]

        gxx = np.empty((k, k))
        gxx[0, 0] = 1.0
        for i in range(1, w):
            gxx[0, 1 + (i - 1) * n : 1 + i * n] = mu[i]
            gxx[1 + (i - 1) * n : 1 + i * n, 0] = mu[i]
            for j in range(1, w):
                blk = second[i, j].copy()
                if i == j:
                    blk += np.diag(meas_at(i))
                gxx[1 + (i - 1) * n : 1 + i * n, 1 + (j - 1) * n : 1 + j * n] = blk
        gamma_xx[t] = _ensure_pd(gxx, t)

        gxy = np.empty((k, n))
        gxy[0] = mu[0]
        for i in range(1, w):
            gxy[1 + (i - 1) * n : 1 + i * n] = second[i, 0]
        gamma_xy[t] = gxy
        gamma_yy[t] = 0.5 * (second[0, 0] + second[0, 0].T) + np.diag(meas_at(0))
        mean_y[t] = mu[0]

    return TheoryMoments(
        gamma_xx=gamma_xx, gamma_xy=gamma_xy, gamma_yy=gamma_yy, mean_y=mean_y
    )
