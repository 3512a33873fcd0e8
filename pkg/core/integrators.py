"""
Fixed-step RK4 with step-doubling error control.

Each nominal step h is compared against two half steps; the half-step result
is accepted when the max-abs difference is within tolerance, otherwise h is
halved. Failing at `max_halvings` raises StepControlError.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from core.errors import AccuracyError, StepControlError

logger = logging.getLogger(__name__)

Rhs = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class StepControl:
    step: float = 0.005
    tolerance: float = 1e-8
    max_halvings: int = 10
    adaptive: bool = True
    check_positivity: bool = True

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError(f"Integrator step must be positive, got {self.step}")
        if self.tolerance <= 0:
            raise ValueError(f"Integrator tolerance must be positive, got {self.tolerance}")


DEFAULT_CONTROL = StepControl()


def rk4_step(f: Rhs, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def controlled_step(f: Rhs, y: np.ndarray, h: float, control: StepControl) -> tuple:
    """
    Advance by at most h. Returns (y_new, h_taken).

    Without adaptivity this is a single RK4 step of size h.
    """
    if not control.adaptive:
        return rk4_step(f, y, h), h
    trial = h
    for _ in range(control.max_halvings + 1):
        full = rk4_step(f, y, trial)
        half = rk4_step(f, rk4_step(f, y, 0.5 * trial), 0.5 * trial)
        err = float(np.max(np.abs(full - half)))
        if err <= control.tolerance:
            return half, trial
        trial *= 0.5
    raise StepControlError(
        f"Step error {err:.3e} above tolerance {control.tolerance:.1e} at minimum step {2 * trial:.3e}"
    )


def propagate(
    f: Rhs,
    y: np.ndarray,
    duration: float,
    control: StepControl = DEFAULT_CONTROL,
    *,
    density: bool = True,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
) -> np.ndarray:
    """
    Integrate dy/dt = f(y) over `duration`.

    Densities are re-symmetrised after every accepted step. `stop`, when given,
    is checked after each step and ends the integration early (used by
    callers that bisect crossings themselves).
    """
    if duration < 0:
        raise ValueError(f"Cannot integrate backwards (duration {duration})")
    remaining = float(duration)
    eps = 1e-12 * max(1.0, duration)
    while remaining > eps:
        h = min(control.step, remaining)
        y, taken = controlled_step(f, y, h, control)
        if density:
            y = hermitize(y)
        remaining -= taken
        if stop is not None and stop(y):
            break
    return y


def assert_positive(rho: np.ndarray, floor: float = 1e-8) -> float:
    """Minimum eigenvalue relative to the trace; raises when below -floor."""
    tr = float(np.trace(rho).real)
    lam = float(np.linalg.eigvalsh(hermitize(rho))[0]) / max(tr, 1e-300)
    if lam < -floor:
        raise AccuracyError(f"Density lost positivity: min eigenvalue/trace {lam:.3e} < -{floor:.0e}")
    return lam
