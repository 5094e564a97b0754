"""Competing forecast models: flat-prior VAR, Minnesota NIW BVAR, and the
standard TVP-VAR whose coefficient innovations have free diagonal
variances with inverse-gamma priors (no Kronecker restriction).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky as _dense_chol

from .blockband import BlockCholesky, BlockTridiag
from .drawstore import DrawStore
from .errors import InsufficientData
from .posterior import StaticDesign
from .prior import presample_statistics
from .sampler import ChainConfig, draw_sigma

__all__ = [
    "ConstantVarPosterior",
    "MinnesotaSpec",
    "StdTvpSpec",
    "fit_flat_var",
    "fit_minnesota",
    "fit_std_tvpvar",
    "tvp_path_conditional",
]


@dataclass(frozen=True)
class ConstantVarPosterior:
    """Matric-variate NIW posterior of a constant-coefficient VAR."""

    location: np.ndarray  # (k, N)
    col_cov: np.ndarray  # (k, k)
    scale: np.ndarray  # (N, N)
    dof: float

    @property
    def nvars(self) -> int:
        return self.scale.shape[0]

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """One (Sigma, Pi) draw."""
        from .prior import NiwParams

        k = self.location.shape[0]
        as_niw = NiwParams(
            location=self.location,
            precision=BlockTridiag(
                np.linalg.inv(self.col_cov)[None, :, :], np.zeros((0, k, k))
            ),
            scale=self.scale,
            dof=self.dof,
        )
        sigma = draw_sigma(as_niw, rng)
        chol_cov = _dense_chol(self.col_cov, lower=True)
        z = rng.standard_normal((k, self.nvars))
        pi = self.location + chol_cov @ z @ _dense_chol(sigma, lower=True).T
        return sigma, pi


def fit_flat_var(design: StaticDesign) -> ConstantVarPosterior:
    """NIW posterior under the improper flat prior, centered at OLS."""
    x, y = design.x[design.observed], design.y[design.observed]
    T, k = x.shape
    n = y.shape[1]
    if T <= k + n:
        raise InsufficientData(f"{T} rows cannot support a flat prior with k={k}, N={n}")
    xtx = x.T @ x
    pi_hat = np.linalg.solve(xtx, x.T @ y)
    resid = y - x @ pi_hat
    return ConstantVarPosterior(
        location=pi_hat,
        col_cov=np.linalg.inv(xtx),
        scale=resid.T @ resid,
        dof=float(T - k),
    )


@dataclass(frozen=True)
class MinnesotaSpec:
    """Minnesota-type NIW prior settings.

    Coefficient variances shrink with the squared lag; each variable's own
    variance scales them, and the centering puts a unit first-own-lag on
    series flagged nonstationary and zero (white noise) otherwise.
    """

    sigma_sq: np.ndarray  # (N,) pre-sample innovation variances
    nonstationary: tuple[bool, ...]
    s0: np.ndarray
    v0: float
    tightness: float = 0.1
    intercept_variance: float = 100.0

    @staticmethod
    def from_presample(y_pre: np.ndarray, p: int, nonstationary, tightness: float = 0.1):
        y_pre = np.atleast_2d(np.asarray(y_pre, dtype=float))
        n = y_pre.shape[1]
        scale, nu, _, _ = presample_statistics(y_pre, p)
        sigma_sq = np.diagonal(scale).copy()
        s0 = _presample_var_cov(y_pre, p, fallback=scale)
        return MinnesotaSpec(
            sigma_sq=sigma_sq,
            nonstationary=tuple(bool(b) for b in nonstationary),
            s0=s0,
            v0=float(n + 2),
            tightness=tightness,
        )

    def centering(self, k: int, p: int) -> np.ndarray:
        n = len(self.nonstationary)
        m0 = np.zeros((k, n))
        for i, flag in enumerate(self.nonstationary):
            if flag:
                m0[1 + i, i] = 1.0  # own first lag
        return m0

    def prior_variances(self, k: int, p: int) -> np.ndarray:
        n = len(self.sigma_sq)
        omega = np.empty(k)
        omega[0] = self.intercept_variance
        for lag in range(1, p + 1):
            for j in range(n):
                omega[1 + (lag - 1) * n + j] = self.tightness / (self.sigma_sq[j] * lag**2)
        return omega


def _presample_var_cov(y_pre: np.ndarray, p: int, fallback: np.ndarray) -> np.ndarray:
    """Residual covariance from an OLS VAR on the pre-sample; falls back to
    the diagonal AR-residual matrix when the pre-sample is too short."""
    t_pre, n = y_pre.shape
    k = 1 + n * p
    if t_pre - p <= k + n:
        return fallback
    from .posterior import lagged_rows

    x, y = lagged_rows(y_pre, p)
    beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    dof = max(x.shape[0] - k, 1)
    return resid.T @ resid / dof


def fit_minnesota(design: StaticDesign, spec: MinnesotaSpec, p: int) -> ConstantVarPosterior:
    """Conjugate NIW posterior under the Minnesota prior."""
    x, y = design.x[design.observed], design.y[design.observed]
    T, k = x.shape
    n = y.shape[1]
    if T < 1:
        raise InsufficientData("no observations")
    omega = spec.prior_variances(k, p)
    m0 = spec.centering(k, p)
    prior_prec = np.diag(1.0 / omega)
    k_post = prior_prec + x.T @ x
    m_post = np.linalg.solve(k_post, prior_prec @ m0 + x.T @ y)
    resid = y - x @ m_post
    shift = m_post - m0
    s_post = spec.s0 + resid.T @ resid + shift.T @ prior_prec @ shift
    return ConstantVarPosterior(
        location=m_post,
        col_cov=np.linalg.inv(k_post),
        scale=0.5 * (s_post + s_post.T),
        dof=spec.v0 + T,
    )


@dataclass(frozen=True)
class StdTvpSpec:
    """Standard TVP-VAR settings: one free innovation variance per
    coefficient, inverse-gamma (shape, scale) hyper-priors, and the
    Minnesota-style inverse-Wishart prior for the innovation covariance."""

    s0: np.ndarray
    v0: float
    omega_shape: float = 3.0
    omega_scale: float = 0.005
    phi0: np.ndarray | None = None  # (k, N); zero when omitted

    @staticmethod
    def from_presample(y_pre: np.ndarray, p: int):
        y_pre = np.atleast_2d(np.asarray(y_pre, dtype=float))
        n = y_pre.shape[1]
        scale, _, _, _ = presample_statistics(y_pre, p)
        s0 = _presample_var_cov(y_pre, p, fallback=scale)
        return StdTvpSpec(s0=s0, v0=float(n + 2))


def _path_precision(
    design: StaticDesign, sigma_inv: np.ndarray, state_prec: np.ndarray
) -> tuple[BlockTridiag, np.ndarray]:
    """Banded precision and linear term of the stacked coefficient path.

    State blocks are vec(Phi_t) (column stacking, m = N*k); the random
    walk ties consecutive blocks with the state-noise precision (a vector
    is treated as a diagonal), the first block is tied to the fixed
    initial location the same way.
    """
    T, k = design.periods, design.k
    n = design.y.shape[1]
    m = n * k
    state_prec = np.asarray(state_prec, dtype=float)
    d_omega = np.diag(state_prec) if state_prec.ndim == 1 else state_prec
    diag = np.zeros((T, m, m))
    sub = np.zeros((max(T - 1, 0), m, m))
    rhs = np.zeros((T, m))
    for t in range(T):
        diag[t] += d_omega
        if t + 1 < T:
            diag[t] += d_omega
            sub[t] = -d_omega
        if design.observed[t]:
            x_t = design.x[t]
            diag[t] += np.kron(sigma_inv, np.outer(x_t, x_t))
            rhs[t] = np.outer(x_t, sigma_inv @ design.y[t]).ravel(order="F")
    return BlockTridiag(diag, sub), rhs.reshape(T * m, 1)


def tvp_path_conditional(
    design: StaticDesign,
    sigma_u: np.ndarray,
    omega: np.ndarray,
    phi0: np.ndarray | None = None,
) -> tuple[np.ndarray, BlockCholesky]:
    """Conditional mean and precision factor of the coefficient path given
    the covariance and the state-noise covariance ``omega`` (a vector of
    per-coefficient variances or a full m x m matrix)."""
    n = design.y.shape[1]
    k = design.k
    m = n * k
    omega = np.asarray(omega, dtype=float)
    state_prec = 1.0 / omega if omega.ndim == 1 else np.linalg.inv(omega)
    sigma_inv = np.linalg.inv(sigma_u)
    prec, rhs = _path_precision(design, sigma_inv, state_prec)
    if phi0 is not None:
        phi0_vec = np.asarray(phi0).ravel(order="F")
        rhs[:m, 0] += (
            state_prec * phi0_vec if state_prec.ndim == 1 else state_prec @ phi0_vec
        )
    factor = prec.cholesky()
    mean = factor.solve(rhs)
    return mean.reshape(design.periods, m), factor


def fit_std_tvpvar(
    design: StaticDesign,
    spec: StdTvpSpec,
    cfg: ChainConfig,
    meta: dict | None = None,
) -> DrawStore:
    """Gibbs sampler for the standard TVP-VAR.

    Alternates the whole coefficient path (band precision solve), the
    innovation covariance (inverse-Wishart), and each coefficient's state
    variance (conditional inverse-gamma with T increment terms, the first
    increment measured from the fixed initial location).
    """
    rng = np.random.default_rng(cfg.seed)
    T, k = design.periods, design.k
    n = design.y.shape[1]
    m = n * k
    phi0_vec = (
        np.zeros(m)
        if spec.phi0 is None
        else np.asarray(spec.phi0, dtype=float).ravel(order="F")
    )

    sigma_u = spec.s0 / max(spec.v0 - n - 1.0, 1.0)
    omega = np.full(m, spec.omega_scale / (spec.omega_shape - 1.0))
    n_saved = cfg.n_saved
    phis = np.empty((n_saved, T, k, n))
    sigmas = np.empty((n_saved, n, n))
    omegas = np.empty((n_saved, m))
    saved = 0

    from .prior import NiwParams

    for it in range(cfg.iterations):
        # coefficient path | sigma, omega
        sigma_inv = np.linalg.inv(sigma_u)
        prec, rhs = _path_precision(design, sigma_inv, 1.0 / omega)
        rhs[:m, 0] += phi0_vec / omega
        factor = prec.cholesky()
        mean = factor.solve(rhs)
        beta = mean + factor.solve_upper(rng.standard_normal((T * m, 1)))
        beta_t = beta.reshape(T, m)

        # sigma | path; each row of beta_t is a column-stacked (k, n) block
        coef = beta_t.reshape(T, n, k).transpose(0, 2, 1)
        resid = design.y - np.einsum("ti,tin->tn", design.x, coef)
        resid = resid[design.observed]
        s_post = spec.s0 + resid.T @ resid
        nu_post = spec.v0 + design.nobs
        sigma_u = draw_sigma(
            NiwParams(
                location=np.zeros((1, n)),
                precision=BlockTridiag(np.ones((1, 1, 1)), np.zeros((0, 1, 1))),
                scale=0.5 * (s_post + s_post.T),
                dof=nu_post,
            ),
            rng,
        )

        # omega_i | path: conjugate inverse gamma, shape nu + T/2
        increments = np.diff(np.vstack([phi0_vec[None, :], beta_t]), axis=0)
        ssq = (increments**2).sum(axis=0)
        shape_post = spec.omega_shape + 0.5 * T
        scale_post = spec.omega_scale + 0.5 * ssq
        omega = scale_post / rng.gamma(shape_post, 1.0, size=m)

        if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thinning == 0 and saved < n_saved:
            phis[saved] = coef
            sigmas[saved] = sigma_u
            omegas[saved] = omega
            saved += 1

    info = dict(meta or {})
    info.update(
        {
            "model": "std-tvp-var",
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "thinning": cfg.thinning,
            "seed": cfg.seed,
            "theta_names": [f"omega_{i}" for i in range(m)],
        }
    )
    return DrawStore(
        phi=phis[:saved],
        sigma_u=sigmas[:saved],
        lam=np.zeros(saved),
        gamma=np.zeros(saved),
        theta=omegas[:saved],
        log_ml=np.full(saved, np.nan),
        meta=info,
    )
