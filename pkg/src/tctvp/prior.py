"""Shrinkage priors for the time-varying VAR coefficients.

Two ingredients are combined into one matric-variate Normal-Inverse-Wishart
bundle: a random-walk smoothness prior whose tightness is controlled by a
persistence hyper-parameter (scalar ``lam`` or one value per regressor),
and a set of artificial moment observations produced by an economic model,
whose weight is the coherence hyper-parameter ``gamma``.  Both enter
through a block-tridiagonal column precision, so all downstream algebra
stays in band form.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _dense_chol
from scipy.special import multigammaln

from .blockband import BlockCholesky, BlockTridiag
from .errors import CholeskyFailure, DegeneratePrior, InsufficientData

__all__ = [
    "BandShift",
    "LambdaSpec",
    "NiwParams",
    "TheoryMoments",
    "rw_prior",
    "theory_update",
    "integrating_constant",
    "conditional_chain",
    "ConditionalChain",
    "dummy_obs",
    "presample_statistics",
]


class BandShift:
    """The first-difference band operator on stacked coefficient blocks.

    Represents the (T*k) x (T*k) lower band matrix with identity diagonal
    blocks and minus-identity first sub-diagonal blocks.  Its determinant
    is one and its inverse is the block cumulative-sum operator, so both
    directions are applied implicitly.
    """

    def __init__(self, periods: int, blocksize: int):
        if periods < 1:
            raise ValueError("need at least one period")
        self.periods = periods
        self.blocksize = blocksize

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """H @ phi for phi of shape (T*k, n): block first differences."""
        x = phi.reshape(self.periods, self.blocksize, -1)
        out = x.copy()
        out[1:] -= x[:-1]
        return out.reshape(phi.shape)

    def apply_inverse(self, rhs: np.ndarray) -> np.ndarray:
        """H^{-1} @ rhs: block cumulative sums (forward substitution)."""
        x = rhs.reshape(self.periods, self.blocksize, -1)
        return np.cumsum(x, axis=0).reshape(rhs.shape)

    def gram(self, row_precisions: np.ndarray) -> BlockTridiag:
        """H' D H for D = blockdiag(row_precisions), shape (T, k, k)."""
        T, k = self.periods, self.blocksize
        diag = np.zeros((T, k, k))
        sub = np.zeros((max(T - 1, 0), k, k))
        for t in range(T):
            diag[t] += row_precisions[t]
            if t + 1 < T:
                diag[t] += row_precisions[t + 1]
                sub[t] = -row_precisions[t + 1]
        return BlockTridiag(diag, sub)


@dataclass(frozen=True)
class LambdaSpec:
    """Persistence hyper-parameters of the random-walk prior.

    ``lam`` is either a scalar or a length-k vector (one tightness per
    regressor).  ``first_block_precision`` optionally replaces the row
    precision of the initial-condition block, implementing the pre-sample
    based initialization of the first coefficient matrix.
    """

    lam: float | np.ndarray
    first_block_precision: np.ndarray | None = None

    def lam_vector(self, k: int) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(self.lam, dtype=float))
        if lam.size == 1:
            lam = np.full(k, lam[0])
        if lam.size != k:
            raise ValueError(f"lambda vector has size {lam.size}, expected {k}")
        if np.any(lam < 0.0):
            raise ValueError("lambda must be nonnegative")
        return lam

    def row_precisions(self, periods: int, k: int) -> np.ndarray:
        lam = self.lam_vector(k)
        base = np.diag(lam**2)
        rows = np.tile(base, (periods, 1, 1))
        if self.first_block_precision is not None:
            p1 = np.asarray(self.first_block_precision, dtype=float)
            if p1.shape != (k, k):
                raise ValueError("first-block precision must be k x k")
            rows[0] = p1
        return rows


@dataclass(frozen=True)
class NiwParams:
    """Matric-variate Normal-Inverse-Wishart parameter bundle.

    The coefficient matrix (T*k x N) is normal with mean ``location`` and
    column covariance equal to the inverse of the block-tridiagonal
    ``precision``; the innovation covariance is inverse-Wishart with
    ``scale`` and ``dof``.
    """

    location: np.ndarray
    precision: BlockTridiag
    scale: np.ndarray
    dof: float

    @property
    def periods(self) -> int:
        return self.precision.nblocks

    @property
    def k(self) -> int:
        return self.precision.blocksize

    @property
    def nvars(self) -> int:
        return self.scale.shape[0]

    def precision_factor(self) -> BlockCholesky:
        """Block Cholesky of the precision; raises CholeskyFailure if improper.

        Memoized: the same bundle's factor is used by the posterior update
        and by the normalizing constant within one likelihood evaluation.
        """
        cached = self.__dict__.get("_factor")
        if cached is None:
            cached = self.precision.cholesky()
            object.__setattr__(self, "_factor", cached)
        return cached

    def log_normalizer(self) -> float:
        """Log NIW normalizing constant, powers of two excluded.

        Specifically log Gamma_N(nu/2) - (nu/2) log|S| + (N/2) log|Psi|
        with log|Psi| = -log|precision|.  The omitted 2-powers combine
        with the (2 pi) factors of the Gaussian data terms into the pure
        pi factors carried explicitly by the marginal-likelihood and
        integrating-constant formulas.
        """
        n = self.nvars
        sign, logdet_s = np.linalg.slogdet(self.scale)
        if sign <= 0:
            raise CholeskyFailure("NIW scale matrix is not positive definite")
        logdet_prec = self.precision_factor().logdet()
        return (
            multigammaln(0.5 * self.dof, n)
            - 0.5 * self.dof * logdet_s
            - 0.5 * n * logdet_prec
        )


@dataclass(frozen=True)
class TheoryMoments:
    """Per-period population second moments implied by a theory at fixed
    deep parameters: E[x x'], E[x y'], E[y y'] and the mean of y."""

    gamma_xx: np.ndarray  # (T, k, k)
    gamma_xy: np.ndarray  # (T, k, N)
    gamma_yy: np.ndarray  # (T, N, N)
    mean_y: np.ndarray  # (T, N)

    @property
    def periods(self) -> int:
        return self.gamma_xx.shape[0]

    def restriction_path(self) -> np.ndarray:
        """Per-period coefficients a dataset from the theory would imply,
        blockwise solve of E[x x'] phi_t = E[x y']."""
        return np.linalg.solve(self.gamma_xx, self.gamma_xy)


def rw_prior(
    lamspec: LambdaSpec,
    phi0: np.ndarray,
    scale: np.ndarray,
    dof: float,
    periods: int,
) -> NiwParams:
    """Random-walk smoothness prior in banded NIW form.

    The location repeats ``phi0`` in every period block; the precision is
    the Gram matrix of the differencing operator weighted by the
    per-period row precisions of ``lamspec``.
    """
    phi0 = np.atleast_2d(np.asarray(phi0, dtype=float))
    k, n = phi0.shape
    lam = lamspec.lam_vector(k)
    if np.all(lam == 0.0) and lamspec.first_block_precision is None:
        raise DegeneratePrior(
            "all-zero persistence with no first-block override leaves the prior precision singular"
        )
    shift = BandShift(periods, k)
    precision = shift.gram(lamspec.row_precisions(periods, k))
    location = np.tile(phi0, (periods, 1))
    scale = np.asarray(scale, dtype=float)
    return NiwParams(location=location, precision=precision, scale=scale, dof=float(dof))


def theory_update(rw: NiwParams, moments: TheoryMoments, gamma: float) -> NiwParams:
    """Fold ``gamma`` artificial samples of theory moments into the prior.

    Conjugate update of the NIW bundle with the moment-form likelihood of
    the simulated observations; ``gamma`` enters continuously.  With
    ``gamma == 0`` the input bundle is returned unchanged.
    """
    if gamma < 0.0:
        raise ValueError("gamma must be nonnegative")
    if gamma == 0.0:
        return rw
    T = rw.periods
    if moments.periods != T:
        raise ValueError(f"moments cover {moments.periods} periods, prior has {T}")
    k, n = rw.k, rw.nvars
    precision = rw.precision.add_blockdiag(gamma * moments.gamma_xx).symmetrized()
    k_m = rw.precision.matmat(rw.location)
    rhs = gamma * moments.gamma_xy.reshape(T * k, n) + k_m
    factor = precision.cholesky()
    location = factor.solve(rhs)
    # Residual form of the scale update: the per-period theory "residual"
    # moment around the new location plus the prior-precision quadratic
    # form of the location shift.  Algebraically identical to the textbook
    # expression but free of its large cancellations when gamma is huge.
    loc_blocks = location.reshape(T, k, n)
    fit_cross = np.einsum("tkn,tkm->nm", loc_blocks, moments.gamma_xy)
    fit_quad = np.einsum("tkn,tkj,tjm->nm", loc_blocks, moments.gamma_xx, loc_blocks)
    theory_resid = moments.gamma_yy.sum(axis=0) - fit_cross - fit_cross.T + fit_quad
    shift = location - rw.location
    scale = rw.scale + gamma * theory_resid + shift.T @ rw.precision.matmat(shift)
    scale = 0.5 * (scale + scale.T)
    return NiwParams(location=location, precision=precision, scale=scale, dof=rw.dof + T * gamma)


def integrating_constant(rw: NiwParams, tc: NiwParams, gamma: float, periods: int, nvars: int) -> float:
    """Log integrating constant of the theory-weighted prior.

    Log-ratio of the NIW normalizing constants of the updated and base
    bundles together with the Gaussian data factor of the gamma*T*N
    artificial observations.
    """
    data_factor = -0.5 * gamma * periods * nvars * np.log(np.pi)
    return data_factor + tc.log_normalizer() - rw.log_normalizer()


@dataclass(frozen=True)
class ConditionalChain:
    """Forward Markov representation of a banded NIW coefficient prior.

    phi_1 = mu_1 + V_1 e_1 and phi_t = mu_t + A_t (phi_{t-1} - mu_{t-1})
    + V_t e_t, with e_t iid standard matric normal (column covariance
    from the innovation matrix).  ``coef[0]`` is zero by convention.
    """

    coef: np.ndarray  # (T, k, k), coef[t] multiplies the previous deviation
    innov: np.ndarray  # (T, k, k), loading on the standardized innovation
    mean: np.ndarray  # (T, k, N)

    def simulate(self, rng: np.random.Generator, sigma_u: np.ndarray) -> np.ndarray:
        """One draw of the full coefficient path, shape (T, k, N)."""
        T, k, n = self.mean.shape
        a_t = _dense_chol(sigma_u, lower=True)
        path = np.empty((T, k, n))
        eps = rng.standard_normal((T, k, n)) @ a_t.T
        path[0] = self.mean[0] + self.innov[0] @ eps[0]
        for t in range(1, T):
            path[t] = (
                self.mean[t]
                + self.coef[t] @ (path[t - 1] - self.mean[t - 1])
                + self.innov[t] @ eps[t]
            )
        return path

    def implied_covariance(self) -> np.ndarray:
        """Dense (T*k, T*k) column covariance implied by the chain (test helper)."""
        T, k, _ = self.mean.shape
        cov = np.zeros((T * k, T * k))
        cov[:k, :k] = self.innov[0] @ self.innov[0].T
        for t in range(1, T):
            a, v = self.coef[t], self.innov[t]
            prev = cov[(t - 1) * k : t * k, (t - 1) * k : t * k]
            cov[t * k : (t + 1) * k, t * k : (t + 1) * k] = a @ prev @ a.T + v @ v.T
            for s in range(t):
                block = a @ cov[(t - 1) * k : t * k, s * k : (s + 1) * k]
                cov[t * k : (t + 1) * k, s * k : (s + 1) * k] = block
                cov[s * k : (s + 1) * k, t * k : (t + 1) * k] = block.T
        return cov


def conditional_chain(tc: NiwParams) -> ConditionalChain:
    """Per-period autoregressive form of the joint coefficient prior.

    Factors the block-tridiagonal precision from the last period backward;
    the forward pass of the resulting innovation representation gives the
    true conditional law of each period given its predecessor, so the
    Markov structure of the prior is explicit.
    """
    u = tc.precision.reverse_cholesky()
    T, k = u.nblocks, u.blocksize
    coef = np.zeros((T, k, k))
    innov = np.zeros((T, k, k))
    eye = np.eye(k)
    for t in range(T):
        innov[t] = np.linalg.solve(u.udiag[t].T, eye)
        if t > 0:
            coef[t] = -innov[t] @ u.usup[t - 1].T
    mean = tc.location.reshape(T, k, tc.nvars)
    return ConditionalChain(coef=coef, innov=innov, mean=mean)


def dummy_obs(lamspec: LambdaSpec, phi0: np.ndarray, periods: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked dummy-observation system equivalent to the random-walk prior.

    Returns (Y*, X*) with X* = W H, W block-diagonal holding the matrix
    square roots of the per-period row precisions.  OLS on the dummies
    reproduces the prior location and X*'X* equals the prior precision.
    """
    phi0 = np.atleast_2d(np.asarray(phi0, dtype=float))
    k, n = phi0.shape
    rows = lamspec.row_precisions(periods, k)
    # Upper-triangular square roots keep the pure-lambda case literally
    # diagonal with the lambdas on the diagonal.
    w = np.zeros_like(rows)
    for t in range(periods):
        if np.allclose(rows[t], np.diag(np.diagonal(rows[t]))):
            w[t] = np.diag(np.sqrt(np.diagonal(rows[t])))
        else:
            w[t] = _dense_chol(rows[t], lower=False)
    ystar = np.zeros((periods * k, n))
    ystar[:k] = w[0] @ phi0
    xstar = np.zeros((periods * k, periods * k))
    for t in range(periods):
        xstar[t * k : (t + 1) * k, t * k : (t + 1) * k] = w[t]
        if t > 0:
            xstar[t * k : (t + 1) * k, (t - 1) * k : t * k] = -w[t]
    return ystar, xstar


def presample_statistics(
    y_pre: np.ndarray, p: int, ar_order: int = 4
) -> tuple[np.ndarray, float, np.ndarray | None, np.ndarray]:
    """Pre-sample based prior inputs: residual-variance scale matrix,
    degrees of freedom, first-block precision, and the zero location.

    The scale is diagonal with univariate AR(``ar_order``) residual
    variances; the first-block precision is one fifth of the accumulated
    regressor outer products.  Falls back to ``None`` (caller keeps the
    plain lambda precision) with a warning when the pre-sample is too
    short to identify a k x k precision.
    """
    y_pre = np.atleast_2d(np.asarray(y_pre, dtype=float))
    t_pre, n = y_pre.shape
    if t_pre < ar_order + 2:
        raise InsufficientData(
            f"pre-sample of {t_pre} rows cannot fit AR({ar_order}) residual variances"
        )
    svals = np.empty(n)
    for i in range(n):
        yi = y_pre[:, i]
        rows = t_pre - ar_order
        x = np.column_stack(
            [np.ones(rows)] + [yi[ar_order - j : t_pre - j] for j in range(1, ar_order + 1)]
        )
        yy = yi[ar_order:]
        beta, *_ = np.linalg.lstsq(x, yy, rcond=None)
        resid = yy - x @ beta
        dof = max(rows - x.shape[1], 1)
        svals[i] = float(resid @ resid) / dof
    scale = np.diag(svals)
    nu = n + 2.0

    k = 1 + n * p
    phi0 = np.zeros((k, n))
    if t_pre - p < k:
        warnings.warn(
            "pre-sample too short to build the first-block precision; "
            "falling back to the plain persistence precision",
            stacklevel=2,
        )
        return scale, nu, None, phi0
    xtx = np.zeros((k, k))
    for t in range(p, t_pre):
        x_t = np.concatenate([[1.0], y_pre[t - 1 :: -1][:p].ravel()])
        xtx += np.outer(x_t, x_t)
    p1 = xtx / 5.0
    return scale, nu, p1, phi0
