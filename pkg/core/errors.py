"""
Exception hierarchy for the simulation and inference toolkit.

Input problems derive from ValueError, numerical failures from RuntimeError,
so callers that only know the built-ins still catch them.
"""

from __future__ import annotations

from typing import Any, Dict, List, Optional


class OptomechError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpaceError(OptomechError, ValueError):
    """Cutoff below 2 or an operator/state that does not fit its space."""


class InvalidStateError(OptomechError, ValueError):
    """State in the wrong form (e.g. density where a vector is required)."""


class RecordMismatchError(OptomechError, ValueError):
    """Click record produced under different parameters or space."""


class ConfigError(OptomechError, ValueError):
    """Experiment configuration failed validation."""

    def __init__(self, message: str, errors: Optional[List[Dict[str, Any]]] = None):
        super().__init__(message)
        self.errors = errors or []


class ZeroNormError(OptomechError, RuntimeError):
    """Jump operator annihilates the state."""


class StepControlError(OptomechError, RuntimeError):
    """Integrator error estimate stayed above tolerance at the minimum step."""


class TruncationError(OptomechError, RuntimeError):
    """Population reached the Fock cutoff."""


class ConvergenceError(OptomechError, RuntimeError):
    """Series or quadrature did not converge."""


class UndefinedCorrelationError(OptomechError, RuntimeError):
    """Correlation function with vanishing emission probability."""


class DegeneratePosteriorError(OptomechError, RuntimeError):
    """Every grid node has zero likelihood or zero prior."""


class AccuracyError(OptomechError, RuntimeError):
    """Numerical accuracy check failed; diagnostics attached."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
