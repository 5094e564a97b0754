from .anticipated import AnnouncementWindow, PathStep, apply_window, solve_anticipated
from .gensys import ReSolution, ReSystem, solve_re, spectral_radius
from .moments import theory_moments
from .nk import MEDIAN_THETA, SIM_THETA, NkTheta, build_nk_system, observation_map, pegged_nk_system, solve_nk
from .registry import TheoryModel, get_model, register, registered_models
from .solution import StateSpaceSolution, simulate, stationary_moments

__all__ = [
    "AnnouncementWindow",
    "MEDIAN_THETA",
    "SIM_THETA",
    "NkTheta",
    "PathStep",
    "ReSolution",
    "ReSystem",
    "StateSpaceSolution",
    "TheoryModel",
    "apply_window",
    "build_nk_system",
    "get_model",
    "observation_map",
    "pegged_nk_system",
    "register",
    "registered_models",
    "simulate",
    "solve_anticipated",
    "solve_nk",
    "solve_re",
    "spectral_radius",
    "stationary_moments",
    "theory_moments",
]
