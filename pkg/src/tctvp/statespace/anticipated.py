"""Time-varying solutions under anticipated structural changes.

When agents learn at period t that the structural equations will differ
over a finite horizon (a pegged policy rate, say) and revert to the
baseline afterwards, the solution coefficients are obtained by a backward
recursion from the baseline fixed point.  Here the recursion runs on the
canonical form directly: at each step the endogenous expectational errors
are solved jointly with the states, and the auxiliary expectation states
are tied to the already-known law of the following period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingularRecursion
from .gensys import ReSolution, ReSystem


@dataclass(frozen=True)
class PathStep:
    const: np.ndarray
    transition: np.ndarray
    impact: np.ndarray


def _definition_rows(system: ReSystem) -> np.ndarray:
    """Map each expectational error to the single row where it loads.

    Systems assembled from explicit expectation auxiliaries have exactly
    one nonzero entry per column of the expectational loading; the
    recursion relies on reading the forward-consistency condition off
    those rows.
    """
    pi = system.pi
    rows = np.full(pi.shape[1], -1, dtype=int)
    for j in range(pi.shape[1]):
        nz = np.flatnonzero(np.abs(pi[:, j]) > 0.0)
        if nz.size != 1:
            raise ValueError(
                "anticipated-path recursion needs one definition row per expectational error"
            )
        rows[j] = nz[0]
    return rows


def solve_anticipated(
    system_path: list[ReSystem] | tuple[ReSystem, ...],
    terminal: ReSolution,
) -> list[PathStep]:
    """Backward recursion for the law of motion along an announced path.

    ``system_path[i]`` is the structural system in force i periods after
    the announcement; after the last entry the baseline ``terminal``
    solution applies.  Returns one (const, transition, impact) triple per
    path period, indexed like ``system_path``.
    """
    if not system_path:
        return []
    n = system_path[0].nstates
    steps: list[PathStep | None] = [None] * len(system_path)
    c_next = terminal.const
    t_next = terminal.transition
    for i in range(len(system_path) - 1, -1, -1):
        system = system_path[i]
        if system.nstates != n:
            raise ValueError("all path systems must share the state dimension")
        rows = _definition_rows(system)
        neta = rows.size
        g0d = system.g0[rows]
        g1d = system.g1[rows]
        gcd = system.gc[rows]
        # Unknowns (s_t, eta_t): canonical rows plus forward-consistency of
        # the expectation definitions against next period's law.
        m = np.zeros((n + neta, n + neta))
        m[:n, :n] = system.g0
        if neta:
            m[:n, n:] = -system.pi
            m[n:, :n] = g1d - g0d @ t_next
        rhs_const = np.concatenate([system.gc, g0d @ c_next - gcd])
        rhs_lag = np.vstack([system.g1, np.zeros((neta, n))])
        rhs_shock = np.vstack([system.psi, np.zeros((neta, system.psi.shape[1]))])
        try:
            sol = np.linalg.solve(m, np.column_stack([rhs_const[:, None], rhs_lag, rhs_shock]))
        except np.linalg.LinAlgError as exc:
            raise SingularRecursion(
                f"coefficient matrix singular {i} periods after the announcement"
            ) from exc
        const = sol[:n, 0]
        transition = sol[:n, 1 : 1 + n]
        impact = sol[:n, 1 + n :]
        steps[i] = PathStep(const=const, transition=transition, impact=impact)
        c_next, t_next = const, transition
    return steps  # type: ignore[return-value]


@dataclass(frozen=True)
class AnnouncementWindow:
    """Calendar of an anticipated fixed-policy regime.

    ``start`` is the first affected period (0-based within the effective
    sample), ``length`` the actual number of affected periods, and
    ``expected_horizon`` caps how many further pegged periods agents
    expect at each date inside the window.  The expectation is renewed
    every period, never reaching beyond the window.
    """

    start: int
    length: int
    expected_horizon: int = 4
    meas_variance: float = 1e-3

    def contains(self, t: int) -> bool:
        return self.start <= t < self.start + self.length

    def expected_duration(self, t: int) -> int:
        remaining = self.start + self.length - t
        return int(min(self.expected_horizon, remaining))


def apply_window(
    pegged_system: ReSystem,
    terminal: ReSolution,
    periods: int,
    window: AnnouncementWindow | None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-period (C, T, R) paths over the sample, re-solving the
    anticipated peg from every period inside the window.

    Outside the window the baseline terminal law applies; inside, each
    period uses the first step of a fresh announcement made that period.
    """
    ns = terminal.nstates
    c_path = np.zeros((periods, ns))
    t_path = np.tile(terminal.transition, (periods, 1, 1))
    r_path = np.tile(terminal.impact, (periods, 1, 1))
    if window is None:
        return c_path, t_path, r_path
    if window.start < 0 or window.start + window.length > periods:
        raise ValueError("announcement window falls outside the sample")
    for t in range(window.start, window.start + window.length):
        steps = solve_anticipated([pegged_system] * window.expected_duration(t), terminal)
        c_path[t] = steps[0].const
        t_path[t] = steps[0].transition
        r_path[t] = steps[0].impact
    return c_path, t_path, r_path
