"""
Truncated Fock-space linear algebra.

Ladder operators, product embeddings, coherent/thermal states, displacement,
partial trace / transpose and truncation diagnostics for the two-mode
(cavity, mechanics) space. Operators and states are built with qutip and
handed on as dense numpy arrays.
"""

from __future__ import annotations

import logging
from typing import Tuple, Union

import numpy as np
import qutip

from core.errors import InvalidSpaceError, InvalidStateError
from models.space import FockSpace, LadderKind, Mode, Operator, State, check_space

logger = logging.getLogger(__name__)

_LADDERS = {
    LadderKind.ANNIHILATION: qutip.destroy,
    LadderKind.CREATION: qutip.create,
    LadderKind.NUMBER: qutip.num,
}


def ladder_operator(dim: int, kind: Union[LadderKind, str]) -> Operator:
    """
    Single-mode ladder operator on levels 0..dim-1.

    Args:
        dim: Mode cutoff (>= 2)
        kind: annihilation, creation or number

    Returns:
        Operator tagged Mode.SINGLE
    """
    if int(dim) < 2:
        raise InvalidSpaceError(f"Mode dimension must be >= 2, got {dim}")
    return Operator(_LADDERS[LadderKind(kind)](int(dim)).full())


def _joint_dims(space: FockSpace) -> list:
    return [[space.dim_cavity, space.dim_mech], [space.dim_cavity, space.dim_mech]]


def embed(op: Operator, which: Union[Mode, str], space: FockSpace) -> Operator:
    """Lift a single-mode operator to the joint space (op x 1 or 1 x op)."""
    which = Mode(which)
    if which not in (Mode.CAVITY, Mode.MECH):
        raise InvalidSpaceError(f"Can only embed on cavity or mech, got {which.value}")
    expected = space.mode_dim(which)
    if op.dim != expected:
        raise InvalidSpaceError(
            f"Operator dimension {op.dim} does not match {which.value} cutoff {expected}"
        )
    local = qutip.Qobj(op.matrix)
    if which == Mode.CAVITY:
        joint = qutip.tensor(local, qutip.qeye(space.dim_mech))
    else:
        joint = qutip.tensor(qutip.qeye(space.dim_cavity), local)
    return Operator(joint.full(), Mode.JOINT)


def coherent_state(amplitude: complex, dim: int) -> State:
    """
    Truncated coherent state, renormalised after truncation.

    The state is flagged `truncated` (and a warning logged) when |alpha|^2 > dim/2.
    """
    alpha = complex(amplitude)
    if alpha == 0:
        ket = qutip.basis(int(dim), 0)
    else:
        # the analytic form keeps the low levels exact; the tail is cut, not folded back
        ket = qutip.coherent(int(dim), alpha, method="analytic")
    vec = ket.full().ravel()
    vec = vec / np.linalg.norm(vec)
    truncated = abs(alpha) ** 2 > dim / 2
    if truncated:
        logger.warning(f"Coherent amplitude |alpha|^2={abs(alpha) ** 2:.3f} exceeds dim/2 for dim={dim}")
    return State.pure(vec, truncated=truncated)


def thermal_state(mean_occupation: float, dim: int) -> State:
    """Diagonal thermal density p_m ~ (mbar/(mbar+1))^m on the truncated space."""
    mbar = float(mean_occupation)
    if mbar < 0:
        raise ValueError(f"Mean occupation must be >= 0, got {mbar}")
    rho = qutip.thermal_dm(int(dim), mbar).full()
    return State.mixed(rho / np.trace(rho).real)


def displacement_operator(amplitude: complex, dim: int) -> Operator:
    """exp(beta b^dag - beta^* b) on the truncated space."""
    return Operator(qutip.displace(int(dim), complex(amplitude)).full())


def product_state(cavity: State, mech: State) -> State:
    """Tensor product, pure when both factors are pure."""
    if cavity.is_pure and mech.is_pure:
        return State.pure(np.kron(cavity.data, mech.data), truncated=cavity.truncated or mech.truncated)
    return State.mixed(np.kron(cavity.density(), mech.density()))


def partial_trace(state: State, keep: Union[Mode, str], space: FockSpace) -> State:
    """Reduced density of the kept mode; vectors are handled without forming the joint density."""
    keep = Mode(keep)
    check_space(state, space)
    if keep not in (Mode.CAVITY, Mode.MECH):
        raise InvalidSpaceError(f"Can only keep cavity or mech, got {keep.value}")
    if state.is_pure:
        psi = state.data.reshape(space.dim_cavity, space.dim_mech)
        reduced = psi @ psi.conj().T if keep == Mode.CAVITY else psi.T @ psi.conj()
        return State.mixed(reduced, state.normalized)
    joint = qutip.Qobj(state.data, dims=_joint_dims(space))
    reduced = joint.ptrace(0 if keep == Mode.CAVITY else 1).full()
    return State.mixed(reduced, state.normalized)


def partial_transpose_mech(state: State, space: FockSpace) -> Operator:
    """(i_c i_m; j_c j_m) -> (i_c j_m; j_c i_m)."""
    check_space(state, space)
    joint = qutip.Qobj(state.density(), dims=_joint_dims(space))
    return Operator(qutip.partial_transpose(joint, [0, 1]).full(), Mode.JOINT)


def truncation_leakage(state: State, space: FockSpace) -> Tuple[float, float]:
    """(population of top cavity level, population of top mech level), relative to the trace."""
    check_space(state, space)
    if state.is_pure:
        probs = np.abs(state.data) ** 2
    else:
        probs = np.real(np.diag(state.data))
    tr = float(probs.sum())
    if tr <= 0:
        raise InvalidStateError(f"Cannot measure leakage of a state with trace {tr}")
    p = probs.reshape(space.dim_cavity, space.dim_mech) / tr
    return float(p[-1, :].sum()), float(p[:, -1].sum())


def initial_state(
    space: FockSpace,
    mbar: float = 0.0,
    cavity_amplitude: complex = 0.0,
    mech_amplitude: complex = 0.0,
    mech_thermal: bool = True,
) -> State:
    """Coherent cavity (vacuum by default) times a thermal or coherent mechanical state."""
    cavity = coherent_state(cavity_amplitude, space.dim_cavity)
    mech = thermal_state(mbar, space.dim_mech) if mech_thermal else coherent_state(mech_amplitude, space.dim_mech)
    return product_state(cavity, mech)
