"""Linear rational-expectations solver on the generalized Schur form.

Canonical system:

    G0 s_t = Gc + G1 s_{t-1} + Psi eps_t + Pi eta_t

with eps exogenous shocks and eta one-step expectational errors determined
in equilibrium.  The stable/unstable split of the QZ pencil plus the rank
conditions on the expectational-error loading give existence and
uniqueness; the stable block solves backward, the unstable block forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import ordqz

from ..errors import Indeterminacy, NoStableSolution

# Stable/unstable split just outside the unit circle so exact unit roots
# count as unstable.
DIV = 1.0 + 1e-6
_RANK_TOL = 1e-9


@dataclass(frozen=True)
class ReSystem:
    """Canonical-form rational-expectations system."""

    g0: np.ndarray
    g1: np.ndarray
    gc: np.ndarray
    psi: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        n = self.g0.shape[0]
        if self.g0.shape != (n, n) or self.g1.shape != (n, n):
            raise ValueError("G0 and G1 must be square and matching")
        if self.gc.shape != (n,):
            raise ValueError("constant must be a length-n vector")
        if self.psi.shape[0] != n or self.pi.shape[0] != n:
            raise ValueError("shock and expectational loadings must have n rows")

    @property
    def nstates(self) -> int:
        return self.g0.shape[0]

    @property
    def nshocks(self) -> int:
        return self.psi.shape[1]

    @property
    def nexp(self) -> int:
        return self.pi.shape[1]

    def replace_row(self, row: int, g0_row, gc_val: float = 0.0) -> "ReSystem":
        """New system with one structural row replaced (zeroed lag/shock/exp)."""
        g0 = self.g0.copy()
        g1 = self.g1.copy()
        gc = self.gc.copy()
        psi = self.psi.copy()
        pi = self.pi.copy()
        g0[row] = g0_row
        g1[row] = 0.0
        gc[row] = gc_val
        psi[row] = 0.0
        pi[row] = 0.0
        return ReSystem(g0, g1, gc, psi, pi)


@dataclass(frozen=True)
class ReSolution:
    """Constant-coefficient solution s_t = const + transition s_{t-1} + impact eps_t."""

    transition: np.ndarray
    impact: np.ndarray
    const: np.ndarray
    eu: tuple[int, int] = field(default=(1, 1))

    @property
    def nstates(self) -> int:
        return self.transition.shape[0]


def solve_re(system: ReSystem, div: float = DIV) -> ReSolution:
    """Unique stable solution of a canonical RE system.

    Raises NoStableSolution when no bounded solution exists and
    Indeterminacy when the bounded solution is not unique.
    """
    n = system.nstates
    if system.nexp == 0:
        # Purely backward system: exact algebra, no Schur step.
        transition = np.linalg.solve(system.g0, system.g1)
        impact = np.linalg.solve(system.g0, system.psi)
        const = np.linalg.solve(system.g0, system.gc)
        return ReSolution(transition=transition, impact=impact, const=const, eu=(1, 1))

    g0 = np.asarray(system.g0, dtype=complex)
    g1 = np.asarray(system.g1, dtype=complex)
    c = np.asarray(system.gc, dtype=complex).reshape(-1, 1)
    psi = np.asarray(system.psi, dtype=complex)
    pi = np.asarray(system.pi, dtype=complex)

    # scipy reports alpha/beta as roots of det(G0 - mu G1); the dynamic
    # roots of det(lam G0 - G1) are beta/alpha, so stability is
    # |beta| < div |alpha| (alpha = 0 marks an infinite, unstable root).
    def take_stable(alpha, beta):
        return np.abs(beta) < div * np.abs(alpha)

    aa, bb, alpha, beta, q, z = ordqz(g0, g1, sort=take_stable, output="complex")
    qh = q.conj().T  # rows of Sims' orthonormal multiplier
    stable_mask = np.abs(beta) < div * np.abs(alpha)
    ns = int(stable_mask.sum())
    nu = n - ns

    q1, q2 = qh[:ns], qh[ns:]
    neta = pi.shape[1]

    if nu == 0:
        phi = np.zeros((ns, 0))
        etawt_rank = 0
    else:
        etawt = q2 @ pi
        u, sv, vh = np.linalg.svd(etawt, full_matrices=False)
        keep = sv > _RANK_TOL * max(1.0, sv[0] if sv.size else 1.0)
        u, sv, vh = u[:, keep], sv[keep], vh[keep]
        etawt_rank = int(keep.sum())
        # Existence: unstable-block shock loadings must lie in the range of
        # the unstable-block expectational loadings.
        zwt = q2 @ psi
        if zwt.size:
            loose = zwt - u @ (u.conj().T @ zwt)
            if np.linalg.norm(loose) > 1e-7 * max(1.0, np.linalg.norm(zwt)):
                raise NoStableSolution(
                    f"unstable-block shock loading escapes the span of the {etawt_rank} "
                    "effective expectational errors"
                )

    if nu > 0:
        etawt1 = q1 @ pi
        u1, sv1, vh1 = np.linalg.svd(etawt1, full_matrices=False)
        keep1 = sv1 > _RANK_TOL * max(1.0, sv1[0] if sv1.size else 1.0)
        vh1 = vh1[keep1]
        sv1 = sv1[keep1]
        u1 = u1[:, keep1]
        # Uniqueness: stable-block expectational content spanned by the
        # unstable block's.
        if vh1.shape[0]:
            v = vh.conj().T
            proj = vh1.conj().T - v @ (v.conj().T @ vh1.conj().T)
            if np.linalg.norm(proj) > 1e-7 * n:
                raise Indeterminacy(
                    f"{nu} unstable roots leave expectational errors underdetermined "
                    f"({neta} errors)"
                )
        phi = (u1 * sv1) @ vh1 @ vh.conj().T @ (u / sv).conj().T if vh1.shape[0] else np.zeros(
            (ns, nu), dtype=complex
        )
    else:
        if neta > 0:
            etawt1 = q1 @ pi
            if np.linalg.matrix_rank(etawt1, tol=1e-9) > 0:
                raise Indeterminacy(
                    "no unstable roots but the system loads on expectational errors"
                )
        phi = np.zeros((ns, 0), dtype=complex)

    tmat = np.hstack([np.eye(ns, dtype=complex), -phi])
    g0_big = np.vstack(
        [
            tmat @ aa,
            np.hstack([np.zeros((nu, ns), dtype=complex), np.eye(nu, dtype=complex)]),
        ]
    )
    g1_big = np.vstack([tmat @ bb, np.zeros((nu, n), dtype=complex)])
    g1_sol = np.linalg.solve(g0_big, g1_big)

    if nu > 0:
        a22 = aa[ns:, ns:]
        b22 = bb[ns:, ns:]
        const_unstable = np.linalg.solve(a22 - b22, q2 @ c)
    else:
        const_unstable = np.zeros((0, 1), dtype=complex)
    c_big = np.vstack([tmat @ (qh @ c), const_unstable])
    c_sol = np.linalg.solve(g0_big, c_big)
    psi_big = np.vstack([tmat @ (qh @ psi), np.zeros((nu, psi.shape[1]), dtype=complex)])
    psi_sol = np.linalg.solve(g0_big, psi_big)

    transition = np.real(z @ g1_sol @ z.conj().T)
    const = np.real(z @ c_sol).ravel()
    impact = np.real(z @ psi_sol)
    return ReSolution(transition=transition, impact=impact, const=const, eu=(1, 1))


def spectral_radius(a: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(a)))) if a.size else 0.0
