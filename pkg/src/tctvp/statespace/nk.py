"""Small three-equation New Keynesian model.

Five structural equations (intertemporal IS curve, Phillips curve with a
growth-over-real-rate discount, inertial policy rule, AR(1) technology and
spending processes) mapped to quarterly observables for output growth,
inflation, and the annualized nominal rate.  All rate parameters are
quarterly percentage points, which is why the levels enter the state
matrices through exp(x / 100).
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .anticipated import AnnouncementWindow, apply_window
from .gensys import ReSolution, ReSystem, solve_re
from .solution import StateSpaceSolution

# State ordering of the canonical system.
IDX_Y, IDX_PI, IDX_R, IDX_Z, IDX_G, IDX_YLAG, IDX_EY, IDX_EPI = range(8)
NSTATES = 8
SHOCK_NAMES = ("policy", "spending", "technology")
OBS_NAMES = ("YGR", "INFL", "INT")


@dataclass(frozen=True)
class NkTheta:
    """Deep parameters; rates in quarterly percent, sigmas are shock sds."""

    ln_gamma: float
    ln_pi_star: float
    ln_r_star: float
    kappa: float
    tau: float
    psi1: float
    psi2: float
    rho_r: float
    rho_g: float
    rho_z: float
    sigma_r: float
    sigma_g: float
    sigma_z: float

    def __post_init__(self):
        for name in ("rho_r", "rho_g", "rho_z"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name}={v} outside (0, 1)")
        for name in ("sigma_r", "sigma_g", "sigma_z", "tau", "kappa"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")

    @staticmethod
    def names() -> tuple[str, ...]:
        return tuple(f.name for f in fields(NkTheta))

    @staticmethod
    def from_array(values) -> "NkTheta":
        values = np.asarray(values, dtype=float)
        return NkTheta(*values.tolist())

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(NkTheta)])

    @property
    def discount(self) -> float:
        """Phillips-curve discount: gross growth over gross real rate."""
        return float(np.exp((self.ln_gamma - self.ln_r_star) / 100.0))

    @property
    def steady_nominal_rate(self) -> float:
        """Quarterly steady-state nominal rate in percent."""
        return self.ln_r_star + self.ln_pi_star


# Posterior medians reported for the US estimation; used as the default
# calibration in simulations and tests.
MEDIAN_THETA = NkTheta(
    ln_gamma=0.979,
    ln_pi_star=0.770,
    ln_r_star=0.227,
    kappa=0.886,
    tau=1.153,
    psi1=1.534,
    psi2=0.139,
    rho_r=0.849,
    rho_g=0.794,
    rho_z=0.209,
    sigma_r=0.080,
    sigma_g=0.345,
    sigma_z=0.416,
)

# Calibration used by the simulation studies: prior-centered values with a
# flat Phillips curve and inertial policy.  The reported posterior medians
# (kappa near 0.9 with near-unit discounting) make the purely
# forward-looking model's response to a multi-quarter anticipated peg
# explode by orders of magnitude, which is unusable as a data-generating
# process; this calibration keeps the peg stimulus at a few percent.
SIM_THETA = NkTheta(
    ln_gamma=0.500,
    ln_pi_star=0.750,
    ln_r_star=0.250,
    kappa=0.100,
    tau=2.500,
    psi1=1.500,
    psi2=0.500,
    rho_r=0.850,
    rho_g=0.800,
    rho_z=0.300,
    sigma_r=0.300,
    sigma_g=0.300,
    sigma_z=0.400,
)

# (family, mean, sd) per deep parameter.
PRIOR_TABLE: dict[str, tuple[str, float, float]] = {
    "ln_gamma": ("normal", 0.500, 0.250),
    "ln_pi_star": ("normal", 1.000, 0.500),
    "ln_r_star": ("gamma", 0.500, 0.250),
    "kappa": ("gamma", 0.300, 0.150),
    "tau": ("gamma", 2.000, 0.500),
    "psi1": ("gamma", 1.500, 0.250),
    "psi2": ("gamma", 0.500, 0.200),
    "rho_r": ("beta", 0.500, 0.250),
    "rho_g": ("beta", 0.800, 0.100),
    "rho_z": ("beta", 0.300, 0.100),
    "sigma_r": ("invgamma", 0.251, 0.139),
    "sigma_g": ("invgamma", 0.630, 0.323),
    "sigma_z": ("invgamma", 0.875, 0.430),
}


def build_nk_system(theta: NkTheta) -> ReSystem:
    """Canonical-form system over (y, pi, R, z, g, lagged y, expected y,
    expected pi) with unit-loading shocks (variances carried separately)."""
    g0 = np.zeros((NSTATES, NSTATES))
    g1 = np.zeros((NSTATES, NSTATES))
    gc = np.zeros(NSTATES)
    psi = np.zeros((NSTATES, 3))
    pi_load = np.zeros((NSTATES, 2))

    # IS curve
    g0[0, IDX_Y] = 1.0
    g0[0, IDX_EY] = -1.0
    g0[0, IDX_R] = 1.0 / theta.tau
    g0[0, IDX_EPI] = -1.0 / theta.tau
    g0[0, IDX_G] = -(1.0 - theta.rho_g)
    g0[0, IDX_Z] = -theta.rho_z / theta.tau
    # Phillips curve
    g0[1, IDX_PI] = 1.0
    g0[1, IDX_EPI] = -theta.discount
    g0[1, IDX_Y] = -theta.kappa
    g0[1, IDX_G] = theta.kappa
    # policy rule
    g0[2, IDX_R] = 1.0
    g0[2, IDX_PI] = -(1.0 - theta.rho_r) * theta.psi1
    g0[2, IDX_Y] = -(1.0 - theta.rho_r) * theta.psi2
    g1[2, IDX_R] = theta.rho_r
    psi[2, 0] = 1.0
    # technology
    g0[3, IDX_Z] = 1.0
    g1[3, IDX_Z] = theta.rho_z
    psi[3, 2] = 1.0
    # spending
    g0[4, IDX_G] = 1.0
    g1[4, IDX_G] = theta.rho_g
    psi[4, 1] = 1.0
    # lagged output identity
    g0[5, IDX_YLAG] = 1.0
    g1[5, IDX_Y] = 1.0
    # expectation definitions
    g0[6, IDX_Y] = 1.0
    g1[6, IDX_EY] = 1.0
    pi_load[6, 0] = 1.0
    g0[7, IDX_PI] = 1.0
    g1[7, IDX_EPI] = 1.0
    pi_load[7, 1] = 1.0
    return ReSystem(g0=g0, g1=g1, gc=gc, psi=psi, pi=pi_load)


def pegged_nk_system(theta: NkTheta) -> ReSystem:
    """Policy row replaced by a fixed nominal rate at its zero floor.

    The deviation is pegged at minus the steady-state nominal rate, so the
    observed annualized rate is exactly zero during the peg.
    """
    row = np.zeros(NSTATES)
    row[IDX_R] = 1.0
    return build_nk_system(theta).replace_row(2, row, gc_val=-theta.steady_nominal_rate)


def observation_map(theta: NkTheta) -> tuple[np.ndarray, np.ndarray]:
    """Constants and loadings for (output growth, inflation, annualized rate)."""
    d = np.array(
        [
            theta.ln_gamma,
            theta.ln_pi_star,
            4.0 * theta.steady_nominal_rate,
        ]
    )
    b = np.zeros((3, NSTATES))
    b[0, IDX_Y] = 1.0
    b[0, IDX_YLAG] = -1.0
    b[0, IDX_Z] = 1.0
    b[1, IDX_PI] = 1.0
    b[2, IDX_R] = 4.0
    return d, b


def shock_variances(theta: NkTheta) -> np.ndarray:
    return np.array([theta.sigma_r**2, theta.sigma_g**2, theta.sigma_z**2])


def solve_nk(
    theta: NkTheta,
    periods: int,
    window: AnnouncementWindow | None = None,
) -> StateSpaceSolution:
    """Full observable solution, with per-period laws when a zero-rate
    announcement window is active; the pegged-rate observable carries the
    window's measurement variance so its second-moment matrix stays
    invertible."""
    system = build_nk_system(theta)
    baseline = solve_re(system)
    d, b = observation_map(theta)
    svar = shock_variances(theta)
    meas = np.zeros((periods, 3))
    if window is None:
        return StateSpaceSolution.constant(d, b, baseline, svar, periods, meas)
    pegged = pegged_nk_system(theta)
    c_path, t_path, r_path = apply_window(pegged, baseline, periods, window)
    for t in range(window.start, window.start + window.length):
        meas[t, 2] = window.meas_variance
    return StateSpaceSolution(
        d=d,
        b=b,
        c_path=c_path,
        t_path=t_path,
        r_path=r_path,
        shock_var=svar,
        meas_var=meas,
        baseline=baseline,
    )
