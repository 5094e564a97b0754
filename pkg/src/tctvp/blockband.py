"""Symmetric block-tridiagonal matrices and their factorizations.

The joint prior and posterior precisions of the time-varying coefficients
are (T*k) x (T*k) symmetric matrices whose only nonzero blocks sit on the
main and first off-block-diagonals.  Everything downstream (posterior
means, log-determinants, path draws, the per-period conditional chain)
reduces to block Cholesky factorizations of such matrices, so they are
never materialized densely except for small test instances.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky as _cholesky
from scipy.linalg import solve_triangular

from .errors import CholeskyFailure

# Dense materialization guard: above this order, asking for a dense copy is a bug.
DENSE_GUARD = 5000


def _chol_lower(a: np.ndarray, what: str) -> np.ndarray:
    if a.shape == (1, 1):  # scalar fast path, worth it in tight chains
        v = a[0, 0]
        if not v > 0.0:
            raise CholeskyFailure(f"{what} is not positive definite")
        return np.array([[np.sqrt(v)]])
    try:
        return _cholesky(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(f"{what} is not positive definite") from exc


def _tri_solve(l: np.ndarray, b: np.ndarray, trans: str = "N") -> np.ndarray:
    if l.shape == (1, 1):
        return b / l[0, 0]
    return solve_triangular(l, b, lower=True, trans=trans, check_finite=False)


@dataclass(frozen=True)
class BlockTridiag:
    """Symmetric block-tridiagonal matrix.

    Attributes
    ----------
    diag : ndarray, shape (T, k, k)
        Main-diagonal blocks.
    sub : ndarray, shape (T-1, k, k)
        Sub-diagonal blocks; ``sub[t]`` is block (t+1, t).  The
        super-diagonal is ``sub[t].T`` by symmetry.
    """

    diag: np.ndarray
    sub: np.ndarray

    @property
    def nblocks(self) -> int:
        return self.diag.shape[0]

    @property
    def blocksize(self) -> int:
        return self.diag.shape[1]

    @property
    def order(self) -> int:
        return self.nblocks * self.blocksize

    @staticmethod
    def zeros(nblocks: int, blocksize: int) -> "BlockTridiag":
        return BlockTridiag(
            np.zeros((nblocks, blocksize, blocksize)),
            np.zeros((max(nblocks - 1, 0), blocksize, blocksize)),
        )

    def __add__(self, other: "BlockTridiag") -> "BlockTridiag":
        return BlockTridiag(self.diag + other.diag, self.sub + other.sub)

    def scale(self, c: float) -> "BlockTridiag":
        return BlockTridiag(c * self.diag, c * self.sub)

    def add_blockdiag(self, blocks: np.ndarray) -> "BlockTridiag":
        """Return self + blockdiag(blocks); blocks has shape (T, k, k)."""
        return BlockTridiag(self.diag + blocks, self.sub.copy())

    def symmetrized(self) -> "BlockTridiag":
        return BlockTridiag(0.5 * (self.diag + np.swapaxes(self.diag, 1, 2)), self.sub.copy())

    def matmat(self, b: np.ndarray) -> np.ndarray:
        """Multiply by a dense (T*k, m) matrix."""
        T, k = self.nblocks, self.blocksize
        x = b.reshape(T, k, -1)
        out = np.einsum("tij,tjm->tim", self.diag, x)
        if T > 1:
            out[1:] += np.einsum("tij,tjm->tim", self.sub, x[:-1])
            out[:-1] += np.einsum("tji,tjm->tim", self.sub, x[1:])
        return out.reshape(T * k, -1)

    def quad(self, m: np.ndarray) -> np.ndarray:
        """Quadratic form m' A m for dense (T*k, n) m."""
        return m.T @ self.matmat(m)

    def to_dense(self) -> np.ndarray:
        if self.order > DENSE_GUARD:
            raise MemoryError(
                f"refusing to materialize a dense {self.order}x{self.order} block-band matrix"
            )
        T, k = self.nblocks, self.blocksize
        out = np.zeros((T * k, T * k))
        for t in range(T):
            out[t * k : (t + 1) * k, t * k : (t + 1) * k] = self.diag[t]
            if t + 1 < T:
                out[(t + 1) * k : (t + 2) * k, t * k : (t + 1) * k] = self.sub[t]
                out[t * k : (t + 1) * k, (t + 1) * k : (t + 2) * k] = self.sub[t].T
        return out

    @staticmethod
    def from_dense(a: np.ndarray, blocksize: int) -> "BlockTridiag":
        n = a.shape[0]
        T = n // blocksize
        diag = np.zeros((T, blocksize, blocksize))
        sub = np.zeros((max(T - 1, 0), blocksize, blocksize))
        for t in range(T):
            diag[t] = a[t * blocksize : (t + 1) * blocksize, t * blocksize : (t + 1) * blocksize]
            if t + 1 < T:
                sub[t] = a[(t + 1) * blocksize : (t + 2) * blocksize, t * blocksize : (t + 1) * blocksize]
        return BlockTridiag(diag, sub)

    def cholesky(self) -> "BlockCholesky":
        """Lower block-bidiagonal Cholesky factor, A = L L'."""
        T, k = self.nblocks, self.blocksize
        if k == 1:
            return self._cholesky_scalar()
        ldiag = np.zeros((T, k, k))
        lsub = np.zeros((max(T - 1, 0), k, k))
        ldiag[0] = _chol_lower(self.diag[0], "leading block")
        for t in range(1, T):
            # L[t, t-1] = A[t, t-1] L[t-1, t-1]^{-T}
            lsub[t - 1] = _tri_solve(ldiag[t - 1], self.sub[t - 1].T).T
            schur = self.diag[t] - lsub[t - 1] @ lsub[t - 1].T
            ldiag[t] = _chol_lower(0.5 * (schur + schur.T), f"block {t}")
        return BlockCholesky(ldiag, lsub)

    def _cholesky_scalar(self) -> "BlockCholesky":
        # plain-float recurrence; tight MCMC loops on univariate chains
        # spend most of their time here otherwise
        T = self.nblocks
        d = self.diag[:, 0, 0].tolist()
        s = self.sub[:, 0, 0].tolist() if T > 1 else []
        ld = [0.0] * T
        ls = [0.0] * max(T - 1, 0)
        v = d[0]
        if not v > 0.0:
            raise CholeskyFailure("leading block is not positive definite")
        ld[0] = v**0.5
        for t in range(1, T):
            ls[t - 1] = s[t - 1] / ld[t - 1]
            v = d[t] - ls[t - 1] * ls[t - 1]
            if not v > 0.0:
                raise CholeskyFailure(f"block {t} is not positive definite")
            ld[t] = v**0.5
        return BlockCholesky(
            np.asarray(ld).reshape(T, 1, 1), np.asarray(ls).reshape(max(T - 1, 0), 1, 1)
        )

    def reverse_cholesky(self) -> "BlockUFactor":
        """Upper block-bidiagonal factor U with A = U U'.

        Factoring from the last block backward yields the innovation
        representation whose forward pass gives the true conditional law of
        block t given block t-1 (ordinary Cholesky gives the time-reversed
        chain instead).
        """
        T, k = self.nblocks, self.blocksize
        udiag = np.zeros((T, k, k))
        usup = np.zeros((max(T - 1, 0), k, k))
        udiag[T - 1] = _chol_lower(self.diag[T - 1], "trailing block")
        for t in range(T - 2, -1, -1):
            # U[t, t+1] = A[t, t+1] U[t+1, t+1]^{-T}
            usup[t] = _tri_solve(udiag[t + 1], self.sub[t]).T
            schur = self.diag[t] - usup[t] @ usup[t].T
            udiag[t] = _chol_lower(0.5 * (schur + schur.T), f"block {t}")
        return BlockUFactor(udiag, usup)

    def logdet(self) -> float:
        return self.cholesky().logdet()

    def is_positive_definite(self) -> bool:
        try:
            self.cholesky()
            return True
        except CholeskyFailure:
            return False


@dataclass(frozen=True)
class BlockCholesky:
    """Lower block-bidiagonal factor L with blocks (T, k, k) and (T-1, k, k)."""

    ldiag: np.ndarray
    lsub: np.ndarray

    @property
    def nblocks(self) -> int:
        return self.ldiag.shape[0]

    @property
    def blocksize(self) -> int:
        return self.ldiag.shape[1]

    def logdet(self) -> float:
        """log det of A = L L'."""
        d = np.diagonal(self.ldiag, axis1=1, axis2=2)
        return 2.0 * float(np.sum(np.log(d)))

    def solve_lower(self, b: np.ndarray) -> np.ndarray:
        """Solve L z = b for dense (T*k, m) b."""
        T, k = self.nblocks, self.blocksize
        if k == 1 and b.size == T:
            ld = self.ldiag[:, 0, 0].tolist()
            ls = self.lsub[:, 0, 0].tolist() if T > 1 else []
            vals = b.reshape(T).tolist()
            out = [0.0] * T
            out[0] = vals[0] / ld[0]
            for t in range(1, T):
                out[t] = (vals[t] - ls[t - 1] * out[t - 1]) / ld[t]
            return np.asarray(out).reshape(T, 1)
        x = b.reshape(T, k, -1).copy()
        x[0] = _tri_solve(self.ldiag[0], x[0])
        for t in range(1, T):
            x[t] -= self.lsub[t - 1] @ x[t - 1]
            x[t] = _tri_solve(self.ldiag[t], x[t])
        return x.reshape(T * k, -1)

    def solve_upper(self, b: np.ndarray) -> np.ndarray:
        """Solve L' x = b for dense (T*k, m) b."""
        T, k = self.nblocks, self.blocksize
        if k == 1 and b.size == T:
            ld = self.ldiag[:, 0, 0].tolist()
            ls = self.lsub[:, 0, 0].tolist() if T > 1 else []
            vals = b.reshape(T).tolist()
            out = [0.0] * T
            out[T - 1] = vals[T - 1] / ld[T - 1]
            for t in range(T - 2, -1, -1):
                out[t] = (vals[t] - ls[t] * out[t + 1]) / ld[t]
            return np.asarray(out).reshape(T, 1)
        x = b.reshape(T, k, -1).copy()
        x[T - 1] = _tri_solve(self.ldiag[T - 1], x[T - 1], trans="T")
        for t in range(T - 2, -1, -1):
            x[t] -= self.lsub[t].T @ x[t + 1]
            x[t] = _tri_solve(self.ldiag[t], x[t], trans="T")
        return x.reshape(T * k, -1)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (L L') x = b."""
        return self.solve_upper(self.solve_lower(b))

    def inverse_diag_blocks(self) -> np.ndarray:
        """Diagonal blocks of (L L')^{-1}, shape (T, k, k).

        Backward block recursion for the covariance blocks of a Markov
        precision; cost O(T k^3).
        """
        T, k = self.nblocks, self.blocksize
        out = np.zeros((T, k, k))
        eye = np.eye(k)
        linv_diag = np.stack([_tri_solve(self.ldiag[t], eye) for t in range(T)])
        out[T - 1] = linv_diag[T - 1].T @ linv_diag[T - 1]
        for t in range(T - 2, -1, -1):
            # Sigma_tt = Ldinv' (I + M' Sigma_{t+1,t+1} M) Ldinv,  M = L[t+1,t] Ldinv
            m = self.lsub[t] @ linv_diag[t]
            out[t] = linv_diag[t].T @ linv_diag[t] + m.T @ out[t + 1] @ m
            out[t] = 0.5 * (out[t] + out[t].T)
        return out


@dataclass(frozen=True)
class BlockUFactor:
    """Upper block-bidiagonal factor U with A = U U' (reverse-ordered Cholesky)."""

    udiag: np.ndarray
    usup: np.ndarray

    @property
    def nblocks(self) -> int:
        return self.udiag.shape[0]

    @property
    def blocksize(self) -> int:
        return self.udiag.shape[1]

    def logdet(self) -> float:
        d = np.diagonal(self.udiag, axis1=1, axis2=2)
        return 2.0 * float(np.sum(np.log(d)))
