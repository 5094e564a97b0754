"""Posterior simulation: hyper-parameter MCMC plus exact coefficient draws.

The posterior factorizes into the marginal posterior of the
hyper-parameters (persistence, theory weight, deep parameters), reachable
through the closed-form marginal likelihood, and the conditional NIW
posterior of the coefficients.  Step one is a Gibbs alternation of two
random-walk Metropolis blocks on transformed scales; step two draws the
innovation covariance by inverse-Wishart and the whole coefficient path in
one band-Cholesky pass.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky as _dense_chol
from scipy.linalg import solve_triangular
from scipy.stats import beta as beta_dist
from scipy.stats import gamma as gamma_dist
from scipy.stats import invgamma, norm

from .errors import CholeskyFailure, NumericalError
from .posterior import StaticDesign, conditional_posterior, marginal_likelihood
from .prior import LambdaSpec, NiwParams, TheoryMoments, rw_prior, theory_update

__all__ = [
    "ChainConfig",
    "HyperChain",
    "HyperPrior",
    "MomentsCache",
    "PriorInputs",
    "ThetaPrior",
    "draw_sigma_phi",
    "run_chain",
    "sample_hyper",
]

HYPER_UPPER_BOUND = 1e10


@dataclass(frozen=True)
class ChainConfig:
    """MCMC run lengths and proposal tuning."""

    iterations: int = 20_000
    burn_in: int = 10_000
    thinning: int = 10
    seed: int = 0
    hyper_step: float = 0.3
    theta_step: float = 0.1
    adapt_window: int = 50
    target_accept: float = 0.25

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must be shorter than the chain")
        if self.thinning < 1 or self.hyper_step <= 0 or self.theta_step <= 0:
            raise ValueError("thinning and step scales must be positive")

    @property
    def n_saved(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass(frozen=True)
class PriorInputs:
    """Fixed inputs of the coefficient prior: initial location, innovation
    scale matrix and dof, and the optional first-block precision."""

    phi0: np.ndarray
    scale: np.ndarray
    dof: float
    first_block_precision: np.ndarray | None = None

    def lam_spec(self, lam) -> LambdaSpec:
        return LambdaSpec(lam, self.first_block_precision)


@dataclass(frozen=True)
class HyperPrior:
    """Independent priors for the persistence and theory-weight
    hyper-parameters; flat on (0, upper) by default."""

    lam_upper: float = HYPER_UPPER_BOUND
    gamma_upper: float = HYPER_UPPER_BOUND
    lam_logpdf: "callable | None" = None
    gamma_logpdf: "callable | None" = None

    def logpdf(self, lam: float, gamma: float) -> float:
        if not (0.0 < lam < self.lam_upper and 0.0 < gamma < self.gamma_upper):
            return -np.inf
        total = 0.0
        if self.lam_logpdf is not None:
            total += self.lam_logpdf(lam)
        else:
            total += -np.log(self.lam_upper)
        if self.gamma_logpdf is not None:
            total += self.gamma_logpdf(gamma)
        else:
            total += -np.log(self.gamma_upper)
        return float(total)


class ThetaPrior:
    """Prior over the deep parameters from a (family, mean, sd) table.

    Families are moment-matched: gamma/inverse-gamma/beta shapes are set so
    the stated mean and standard deviation are exact.  Sampling happens on
    transformed scales (log for positive support, logit for the unit
    interval), so draws never leave the support.
    """

    def __init__(self, table: dict[str, tuple[str, float, float]], names: tuple[str, ...]):
        self.names = tuple(names)
        self.dists = []
        self.transforms = []
        for name in self.names:
            family, mean, sd = table[name]
            family = family.lower()
            if family == "normal":
                self.dists.append(norm(mean, sd))
                self.transforms.append("identity")
            elif family == "gamma":
                shape = (mean / sd) ** 2
                self.dists.append(gamma_dist(shape, scale=sd**2 / mean))
                self.transforms.append("log")
            elif family == "invgamma":
                shape = 2.0 + (mean / sd) ** 2
                self.dists.append(invgamma(shape, scale=mean * (shape - 1.0)))
                self.transforms.append("log")
            elif family == "beta":
                common = mean * (1.0 - mean) / sd**2 - 1.0
                if common <= 0:
                    raise ValueError(f"beta prior for {name} has impossible sd")
                self.dists.append(beta_dist(mean * common, (1.0 - mean) * common))
                self.transforms.append("logit")
            else:
                raise ValueError(f"unknown prior family {family!r} for {name}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def to_unconstrained(self, theta: np.ndarray) -> np.ndarray:
        out = np.empty(self.dim)
        for i, tr in enumerate(self.transforms):
            x = theta[i]
            if tr == "identity":
                out[i] = x
            elif tr == "log":
                out[i] = np.log(x)
            else:
                out[i] = np.log(x) - np.log1p(-x)
        return out

    def to_constrained(self, u: np.ndarray) -> np.ndarray:
        out = np.empty(self.dim)
        for i, tr in enumerate(self.transforms):
            if tr == "identity":
                out[i] = u[i]
            elif tr == "log":
                out[i] = np.exp(u[i])
            else:
                out[i] = 1.0 / (1.0 + np.exp(-u[i]))
        return out

    def logpdf_unconstrained(self, u: np.ndarray) -> float:
        """Prior density in the transformed space (Jacobian included)."""
        theta = self.to_constrained(u)
        total = 0.0
        for i, (dist, tr) in enumerate(zip(self.dists, self.transforms)):
            lp = dist.logpdf(theta[i])
            if not np.isfinite(lp):
                return -np.inf
            total += lp
            if tr == "log":
                total += u[i]
            elif tr == "logit":
                total += np.log(theta[i]) + np.log1p(-theta[i])
        return float(total)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        return np.array([d.rvs(random_state=rng) for d in self.dists])


class MomentsCache:
    """Theory-moment evaluations keyed by the parameter bytes.

    One chain alternates two blocks, and the persistence/theory-weight
    block re-evaluates at an unchanged deep-parameter point; a small cache
    removes the duplicated solve, which dominates cost.
    """

    def __init__(self, fn, maxsize: int = 16):
        self.fn = fn
        self.maxsize = maxsize
        self._store: dict[bytes, TheoryMoments] = {}

    def __call__(self, theta: np.ndarray) -> TheoryMoments:
        key = np.ascontiguousarray(theta, dtype=float).tobytes()
        hit = self._store.get(key)
        if hit is not None:
            return hit
        value = self.fn(theta)
        if len(self._store) >= self.maxsize:
            self._store.pop(next(iter(self._store)))
        self._store[key] = value
        return value


@dataclass
class HyperChain:
    """Saved hyper-parameter draws with their log marginal likelihoods."""

    lam: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    log_ml: np.ndarray
    accept_hyper: float
    accept_theta: float
    warnings: list[str] = field(default_factory=list)


def _log_target(
    design: StaticDesign,
    prior_inputs: PriorInputs,
    moments: TheoryMoments | None,
    lam: float,
    gamma: float,
) -> float:
    """log p(Y | lam, theta, gamma) via the closed-form marginal likelihood."""
    rw = rw_prior(
        prior_inputs.lam_spec(lam),
        prior_inputs.phi0,
        prior_inputs.scale,
        prior_inputs.dof,
        design.periods,
    )
    bundle = rw if moments is None or gamma == 0.0 else theory_update(rw, moments, gamma)
    return marginal_likelihood(design, bundle).total


def sample_hyper(
    design: StaticDesign,
    moments_fn,
    theta_prior: ThetaPrior | None,
    prior_inputs: PriorInputs,
    cfg: ChainConfig,
    hyper_prior: HyperPrior | None = None,
    init_lam: float = 1.0,
    init_gamma: float = 1.0,
    init_theta: np.ndarray | None = None,
    fix_lam: float | None = None,
    fix_gamma: float | None = None,
    fixed_theta: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> HyperChain:
    """Gibbs alternation of two random-walk Metropolis blocks.

    Block one proposes (lam, gamma) jointly on the log scale given the
    deep parameters; block two proposes the transformed deep parameters
    given (lam, gamma).  Theory failures (indeterminacy, singular moments,
    failed factorizations) reject the proposal as zero likelihood.  Step
    sizes adapt toward the target acceptance during burn-in only, so the
    post-burn-in kernel is fixed.

    ``fix_lam`` / ``fix_gamma`` pin a hyper-parameter (point-mass prior);
    ``fixed_theta`` pins the deep parameters when no theta prior is given.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    hyper_prior = hyper_prior or HyperPrior()
    cache = MomentsCache(moments_fn) if moments_fn is not None else None
    theta_dim = theta_prior.dim if theta_prior is not None else 0
    free = np.array([fix_lam is None, fix_gamma is None])

    def moments_at(theta: np.ndarray | None) -> TheoryMoments | None:
        if cache is None:
            return None
        return cache(theta if theta is not None else np.zeros(0))

    def loglik(u_hyper: np.ndarray, moments) -> float:
        lam, gamma = np.exp(u_hyper)
        try:
            return _log_target(design, prior_inputs, moments, lam, gamma)
        except NumericalError:
            return -np.inf

    def hyper_logprior(u_hyper: np.ndarray) -> float:
        """Prior over the free hyper components, log-transform Jacobians included."""
        lam, gamma = np.exp(u_hyper)
        total = 0.0
        if free[0]:
            if not 0.0 < lam < hyper_prior.lam_upper:
                return -np.inf
            total += (
                hyper_prior.lam_logpdf(lam)
                if hyper_prior.lam_logpdf is not None
                else -np.log(hyper_prior.lam_upper)
            ) + u_hyper[0]
        if free[1]:
            if not 0.0 < gamma < hyper_prior.gamma_upper:
                return -np.inf
            total += (
                hyper_prior.gamma_logpdf(gamma)
                if hyper_prior.gamma_logpdf is not None
                else -np.log(hyper_prior.gamma_upper)
            ) + u_hyper[1]
        return float(total)

    if init_theta is None and theta_prior is not None:
        init_theta = np.array([d.mean() for d in theta_prior.dists])
    theta_now = (
        theta_prior.to_constrained(theta_prior.to_unconstrained(init_theta))
        if theta_prior is not None
        else (np.asarray(fixed_theta, dtype=float) if fixed_theta is not None else None)
    )
    u_theta = theta_prior.to_unconstrained(init_theta) if theta_prior is not None else np.zeros(0)
    with np.errstate(divide="ignore"):  # a pinned value of exactly zero is legal
        u_hyper = np.log(
            [
                fix_lam if fix_lam is not None else init_lam,
                fix_gamma if fix_gamma is not None else init_gamma,
            ]
        )

    current_moments = moments_at(theta_now)
    ll_now = loglik(u_hyper, current_moments)
    if not np.isfinite(ll_now):
        raise ValueError("initial hyper-parameter point has zero posterior density")
    lp_theta_prior = (
        theta_prior.logpdf_unconstrained(u_theta) if theta_prior is not None else 0.0
    )

    n_saved = cfg.n_saved
    lam_out = np.empty(n_saved)
    gamma_out = np.empty(n_saved)
    theta_out = np.empty((n_saved, theta_dim))
    logml_out = np.empty(n_saved)

    step_hyper = cfg.hyper_step
    step_theta = cfg.theta_step
    acc_hyper_post = acc_theta_post = 0
    n_post = 0
    window_hyper = window_theta = 0
    window_n = 0
    saved = 0

    for it in range(cfg.iterations):
        if free.any():
            prop = u_hyper.copy()
            prop[free] += step_hyper * rng.standard_normal(int(free.sum()))
            lp_prior_prop = hyper_logprior(prop)
            if np.isfinite(lp_prior_prop):
                ll_prop = loglik(prop, current_moments)
                log_alpha = lp_prior_prop + ll_prop - hyper_logprior(u_hyper) - ll_now
            else:
                log_alpha = -np.inf
            if np.log(rng.uniform()) < log_alpha:
                u_hyper, ll_now = prop, ll_prop
                window_hyper += 1
                if it >= cfg.burn_in:
                    acc_hyper_post += 1

        if theta_prior is not None:
            prop_t = u_theta + step_theta * rng.standard_normal(theta_dim)
            lp_prior_prop = theta_prior.logpdf_unconstrained(prop_t)
            if np.isfinite(lp_prior_prop):
                theta_prop = theta_prior.to_constrained(prop_t)
                try:
                    moments_prop = moments_at(theta_prop)
                    ll_prop = loglik(u_hyper, moments_prop)
                except NumericalError:
                    ll_prop = -np.inf
                log_alpha = lp_prior_prop + ll_prop - lp_theta_prior - ll_now
            else:
                log_alpha = -np.inf
            if np.log(rng.uniform()) < log_alpha:
                u_theta, theta_now = prop_t, theta_prop
                current_moments = moments_prop
                ll_now = ll_prop
                lp_theta_prior = lp_prior_prop
                window_theta += 1
                if it >= cfg.burn_in:
                    acc_theta_post += 1

        window_n += 1
        if it < cfg.burn_in and window_n == cfg.adapt_window:
            if free.any():
                step_hyper *= float(np.exp(window_hyper / window_n - cfg.target_accept))
            if theta_prior is not None:
                step_theta *= float(np.exp(window_theta / window_n - cfg.target_accept))
            window_hyper = window_theta = window_n = 0

        if it >= cfg.burn_in:
            n_post += 1
            if (it - cfg.burn_in) % cfg.thinning == 0 and saved < n_saved:
                lam_out[saved], gamma_out[saved] = np.exp(u_hyper)
                if theta_dim:
                    theta_out[saved] = theta_now
                logml_out[saved] = ll_now
                saved += 1

    notes = []
    rate_hyper = acc_hyper_post / max(n_post, 1) if free.any() else float("nan")
    rate_theta = acc_theta_post / max(n_post, 1) if theta_prior is not None else float("nan")
    if free.any() and not 0.1 <= rate_hyper <= 0.5:
        notes.append(f"hyper-block acceptance {rate_hyper:.3f} outside [0.1, 0.5]")
    if theta_prior is not None and not 0.1 <= rate_theta <= 0.5:
        notes.append(f"theta-block acceptance {rate_theta:.3f} outside [0.1, 0.5]")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return HyperChain(
        lam=lam_out[:saved],
        gamma=gamma_out[:saved],
        theta=theta_out[:saved],
        log_ml=logml_out[:saved],
        accept_hyper=rate_hyper,
        accept_theta=rate_theta,
        warnings=notes,
    )


def draw_sigma(posterior: NiwParams, rng: np.random.Generator) -> np.ndarray:
    """Inverse-Wishart draw of the innovation covariance (Bartlett form)."""
    n = posterior.nvars
    nu = posterior.dof
    if nu <= n - 1:
        raise CholeskyFailure("inverse-Wishart dof too small to draw")
    ls = _dense_chol(posterior.scale, lower=True)
    bart = np.zeros((n, n))
    for i in range(n):
        bart[i, i] = np.sqrt(rng.chisquare(nu - i))
        for j in range(i):
            bart[i, j] = rng.standard_normal()
    # sigma = Ls A^{-T} A^{-1} Ls'
    half = solve_triangular(bart, ls.T, lower=True, check_finite=False).T
    sigma = half @ half.T
    return 0.5 * (sigma + sigma.T)


def draw_phi(posterior: NiwParams, sigma_u: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Joint draw of the whole coefficient path given the covariance.

    One triangular solve against the band Cholesky factor covers all
    periods and equations at once.
    """
    n = posterior.nvars
    factor = posterior.precision_factor()
    z = rng.standard_normal((posterior.periods * posterior.k, n))
    col_noise = factor.solve_upper(z)
    a_sigma = _dense_chol(sigma_u, lower=True)
    phi = posterior.location + col_noise @ a_sigma.T
    if not np.all(np.isfinite(phi)):
        raise CholeskyFailure("non-finite coefficient draw")
    return phi


def draw_sigma_phi(
    posterior: NiwParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One exact draw from the NIW coefficient posterior."""
    sigma = draw_sigma(posterior, rng)
    return sigma, draw_phi(posterior, sigma, rng)


def run_chain(
    design: StaticDesign,
    moments_fn,
    theta_prior: ThetaPrior | None,
    prior_inputs: PriorInputs,
    cfg: ChainConfig,
    hyper_prior: HyperPrior | None = None,
    meta: dict | None = None,
    **hyper_kwargs,
):
    """Full posterior simulation into a DrawStore.

    Step one samples the hyper-parameters on the marginal posterior; step
    two revisits every saved draw and samples the innovation covariance
    and the whole coefficient path exactly from the conditional NIW.
    Draws whose conditional factorization fails numerically are dropped
    and logged in the metadata rather than aborting the chain.
    """
    from .drawstore import DrawStore

    rng = np.random.default_rng(cfg.seed)
    chain = sample_hyper(
        design,
        moments_fn,
        theta_prior,
        prior_inputs,
        cfg,
        hyper_prior=hyper_prior,
        rng=rng,
        **hyper_kwargs,
    )
    cache = MomentsCache(moments_fn) if moments_fn is not None else None
    fixed_theta = hyper_kwargs.get("fixed_theta")

    phis, sigmas, kept = [], [], []
    rejections = []
    for i in range(chain.lam.size):
        lam, gamma = chain.lam[i], chain.gamma[i]
        theta = chain.theta[i] if chain.theta.shape[1] else fixed_theta
        try:
            moments = None
            if cache is not None:
                moments = cache(theta if theta is not None else np.zeros(0))
            rw = rw_prior(
                prior_inputs.lam_spec(lam),
                prior_inputs.phi0,
                prior_inputs.scale,
                prior_inputs.dof,
                design.periods,
            )
            bundle = rw if moments is None or gamma == 0.0 else theory_update(rw, moments, gamma)
            post = conditional_posterior(design, bundle)
            sigma, phi = draw_sigma_phi(post, rng)
        except NumericalError as exc:
            rejections.append(f"draw {i}: {exc}")
            continue
        phis.append(phi.reshape(design.periods, design.k, design.nvars))
        sigmas.append(sigma)
        kept.append(i)
    kept = np.asarray(kept, dtype=int)
    info = dict(meta or {})
    info.update(
        {
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "thinning": cfg.thinning,
            "seed": cfg.seed,
            "accept_hyper": chain.accept_hyper,
            "accept_theta": chain.accept_theta,
            "warnings": chain.warnings,
            "numerical_rejections": rejections,
        }
    )
    theta_kept = (
        chain.theta[kept] if chain.theta.shape[1] else np.zeros((kept.size, 0))
    )
    return DrawStore(
        phi=np.asarray(phis),
        sigma_u=np.asarray(sigmas),
        lam=chain.lam[kept],
        gamma=chain.gamma[kept],
        theta=theta_kept,
        log_ml=chain.log_ml[kept],
        meta=info,
    )
