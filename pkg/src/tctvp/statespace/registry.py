"""Registry of theory models behind one interface: parameter vector in,
observable state-space solution out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .anticipated import AnnouncementWindow
from .nk import (
    MEDIAN_THETA,
    OBS_NAMES,
    PRIOR_TABLE,
    SHOCK_NAMES,
    NkTheta,
    solve_nk,
)
from .solution import StateSpaceSolution

Builder = Callable[[np.ndarray, int, "AnnouncementWindow | None"], StateSpaceSolution]


@dataclass(frozen=True)
class TheoryModel:
    name: str
    theta_names: tuple[str, ...]
    prior_table: dict[str, tuple[str, float, float]]
    default_theta: np.ndarray
    shock_names: tuple[str, ...]
    obs_names: tuple[str, ...]
    build: Builder


_REGISTRY: dict[str, TheoryModel] = {}


def register(model: TheoryModel) -> None:
    _REGISTRY[model.name] = model


def get_model(name: str) -> TheoryModel:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown theory model {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


def registered_models() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def _build_nk(theta: np.ndarray, periods: int, window: AnnouncementWindow | None):
    return solve_nk(NkTheta.from_array(theta), periods, window)


register(
    TheoryModel(
        name="nk-small",
        theta_names=NkTheta.names(),
        prior_table=PRIOR_TABLE,
        default_theta=MEDIAN_THETA.to_array(),
        shock_names=SHOCK_NAMES,
        obs_names=OBS_NAMES,
        build=_build_nk,
    )
)
