"""
Truncated two-mode Fock space value types.

Joint basis ordering is cavity-major: index = n_cavity * dim_mech + n_mech,
which is exactly the np.kron(cavity, mech) layout.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Dict, Optional

import numpy as np

from core.errors import InvalidSpaceError, InvalidStateError

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-9


class Mode(str, Enum):
    """Which factor of the joint space an object lives on."""
    CAVITY = "cavity"
    MECH = "mech"
    JOINT = "joint"
    SINGLE = "single"  # a bare single-mode space of given dim


class LadderKind(str, Enum):
    ANNIHILATION = "annihilation"
    CREATION = "creation"
    NUMBER = "number"


@dataclass(frozen=True)
class FockSpace:
    """Cutoffs of the cavity (N_c) and mechanical (N_m) modes."""
    dim_cavity: int
    dim_mech: int

    def __post_init__(self):
        if int(self.dim_cavity) < 2 or int(self.dim_mech) < 2:
            raise InvalidSpaceError(
                f"Fock cutoffs must be >= 2, got dim_cavity={self.dim_cavity}, dim_mech={self.dim_mech}"
            )

    @property
    def dim(self) -> int:
        return self.dim_cavity * self.dim_mech

    def mode_dim(self, which: Mode) -> int:
        if which == Mode.CAVITY:
            return self.dim_cavity
        if which == Mode.MECH:
            return self.dim_mech
        if which == Mode.JOINT:
            return self.dim
        raise InvalidSpaceError(f"Mode {which} has no fixed dimension in {self}")

    def index(self, n_cavity: int, n_mech: int) -> int:
        return n_cavity * self.dim_mech + n_mech

    def to_dict(self) -> Dict[str, int]:
        return {"dim_cavity": self.dim_cavity, "dim_mech": self.dim_mech}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FockSpace":
        return cls(dim_cavity=int(data["dim_cavity"]), dim_mech=int(data["dim_mech"]))


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix tagged with the space it acts on."""
    matrix: np.ndarray
    mode: Mode = Mode.SINGLE

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidSpaceError(f"Operator matrix must be square, got shape {m.shape}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> "Operator":
        return Operator(self.matrix.conj().T, self.mode)

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.dim != other.dim:
            raise InvalidSpaceError(f"Cannot compose operators of dims {self.dim} and {other.dim}")
        return Operator(self.matrix @ other.matrix, self.mode)


@dataclass(frozen=True, eq=False)
class State:
    """
    Pure (1-D vector) or mixed (2-D density) state, possibly unnormalised.

    Construction only checks shape; `validate` enforces the Hermiticity and
    trace contract and is called at API boundaries.
    """
    data: np.ndarray
    normalized: bool = True
    truncated: bool = False

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex)
        if d.ndim == 2 and d.shape[0] != d.shape[1]:
            raise InvalidStateError(f"Density matrix must be square, got shape {d.shape}")
        if d.ndim not in (1, 2):
            raise InvalidStateError(f"State data must be a vector or a matrix, got ndim={d.ndim}")
        object.__setattr__(self, "data", d)

    @classmethod
    def pure(cls, vector: np.ndarray, normalized: bool = True, truncated: bool = False) -> "State":
        return cls(np.asarray(vector, dtype=complex).reshape(-1), normalized, truncated)

    @classmethod
    def mixed(cls, density: np.ndarray, normalized: bool = True) -> "State":
        return cls(np.asarray(density, dtype=complex), normalized)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def trace(self) -> float:
        """Norm squared for vectors, real trace for densities."""
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_density(self) -> "State":
        if not self.is_pure:
            return self
        return State(self.density(), self.normalized, self.truncated)

    def normalize(self) -> "State":
        tr = self.trace()
        if tr <= 0.0:
            raise InvalidStateError(f"Cannot normalise a state with trace {tr}")
        if self.is_pure:
            return replace(self, data=self.data / np.sqrt(tr), normalized=True)
        return replace(self, data=self.data / tr, normalized=True)

    def expect(self, op: np.ndarray) -> complex:
        """Tr(op rho) without normalising."""
        if self.is_pure:
            return complex(np.vdot(self.data, op @ self.data))
        return complex(np.trace(op @ self.data))

    def validate(self, hermiticity_tol: float = HERMITICITY_TOL, trace_tol: float = TRACE_TOL) -> "State":
        tr = self.trace()
        if not (0.0 < tr <= 1.0 + trace_tol):
            raise InvalidStateError(f"State trace/norm^2 {tr!r} outside (0, 1+{trace_tol}]")
        if not self.is_pure:
            defect = float(np.max(np.abs(self.data - self.data.conj().T)))
            if defect > hermiticity_tol:
                raise InvalidStateError(f"Density not Hermitian: defect {defect:.3e} > {hermiticity_tol}")
        return self


def check_space(state: State, space: FockSpace, what: str = "state") -> None:
    if state.dim != space.dim:
        raise InvalidSpaceError(f"{what} has dimension {state.dim}, space {space} needs {space.dim}")


def random_density(dim: int, rng: Optional[np.random.Generator] = None, rank: Optional[int] = None) -> np.ndarray:
    """Random normalised density matrix (Ginibre construction)."""
    rng = rng or np.random.default_rng()
    k = rank or dim
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real
