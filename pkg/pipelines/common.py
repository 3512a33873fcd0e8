"""
Shared setup for experiment executors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from core.hamiltonians import detuning_for_regime
from core.integrators import StepControl
from core.schemas import ExperimentConfig, VariantModel
from models.params import SystemParams
from models.space import FockSpace, State


@dataclass
class Setup:
    params: SystemParams
    space: FockSpace
    control: StepControl
    initial: State
    regime: Optional[int]


def setup_from_config(config: ExperimentConfig) -> Setup:
    params = config.system.to_params()
    space = config.space.to_space()
    return Setup(
        params=params,
        space=space,
        control=config.step.to_control(),
        initial=config.initial.to_state(space, params.mbar),
        regime=config.system.regime,
    )


def checkpoint_grid(t_end: float, every: float) -> np.ndarray:
    """0, every, 2 every, ..., always ending exactly at t_end."""
    n = int(np.floor(t_end / every + 1e-9))
    grid = every * np.arange(n + 1)
    if t_end - grid[-1] > 1e-9 * max(1.0, t_end):
        grid = np.append(grid, t_end)
    return grid


def params_for_regime(params: SystemParams, regime: int, coupling: Optional[float] = None) -> SystemParams:
    g = params.g if coupling is None else coupling
    return params.with_updates(delta=detuning_for_regime(regime, g, params.omega_m))


def apply_variant(params: SystemParams, variant: VariantModel) -> SystemParams:
    """Regime detuning (if named), then the detuning scale and rate overrides."""
    if variant.g is not None:
        params = params.with_updates(g=variant.g)
    if variant.regime is not None:
        params = params_for_regime(params, variant.regime)
    updates = {"delta": params.delta * variant.delta_scale}
    if variant.kappa_d is not None:
        updates["kappa_d"] = variant.kappa_d
    if variant.kappa_l is not None:
        updates["kappa_l"] = variant.kappa_l
    return params.with_updates(**updates)


def regime_label(regime: Optional[int]) -> str:
    return "base" if regime is None else f"n{regime}"
