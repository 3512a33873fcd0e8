"""
Hamiltonians and level structure of the optomechanical system.

    H_RF  = -Delta a^dag a + omega_m b^dag b + g a^dag a (b + b^dag) + (Omega a + Omega^* a^dag) / 2
    H_pol = -Delta a^dag a + omega_m b^dag b - (g^2/omega_m)(a^dag a)^2 + (Omega a D + h.c.) / 2
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple, Union

import numpy as np

from core.fock import displacement_operator, embed, ladder_operator
from models.params import DetuningRegime, SystemParams
from models.space import FockSpace, LadderKind, Mode, Operator


@dataclass(frozen=True, eq=False)
class JointOperators:
    """Ladder operators lifted to the joint space."""
    a: np.ndarray
    b: np.ndarray
    n_a: np.ndarray
    n_b: np.ndarray
    identity: np.ndarray

    @property
    def ad(self) -> np.ndarray:
        return self.a.conj().T

    @property
    def bd(self) -> np.ndarray:
        return self.b.conj().T


@lru_cache(maxsize=16)
def joint_operators(space: FockSpace) -> JointOperators:
    a = embed(ladder_operator(space.dim_cavity, LadderKind.ANNIHILATION), Mode.CAVITY, space).matrix
    b = embed(ladder_operator(space.dim_mech, LadderKind.ANNIHILATION), Mode.MECH, space).matrix
    n_a = embed(ladder_operator(space.dim_cavity, LadderKind.NUMBER), Mode.CAVITY, space).matrix
    n_b = embed(ladder_operator(space.dim_mech, LadderKind.NUMBER), Mode.MECH, space).matrix
    return JointOperators(a=a, b=b, n_a=n_a, n_b=n_b, identity=np.eye(space.dim, dtype=complex))


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def hamiltonian_rf(params: SystemParams, space: FockSpace) -> Operator:
    """Rotating-frame Hamiltonian (hbar = 1), symmetrised to be exactly Hermitian."""
    ops = joint_operators(space)
    x = ops.b + ops.bd
    h = (
        -params.delta * ops.n_a
        + params.omega_m * ops.n_b
        + params.g * ops.n_a @ x
        + 0.5 * (params.omega_drive * ops.a + params.omega_drive.conjugate() * ops.ad)
    )
    return Operator(_hermitize(h), Mode.JOINT)


def hamiltonian_polaron(params: SystemParams, space: FockSpace) -> Operator:
    """Polaron-frame Hamiltonian with the photon Kerr term and displaced drive."""
    ops = joint_operators(space)
    a_cav = ladder_operator(space.dim_cavity, LadderKind.ANNIHILATION).matrix
    disp = displacement_operator(params.k, space.dim_mech).matrix
    drive = np.kron(a_cav, disp)
    h = (
        -params.delta * ops.n_a
        + params.omega_m * ops.n_b
        - (params.g ** 2 / params.omega_m) * ops.n_a @ ops.n_a
        + 0.5 * (params.omega_drive * drive + (params.omega_drive * drive).conj().T)
    )
    return Operator(_hermitize(h), Mode.JOINT)


def polaron_unitary(params: SystemParams, space: FockSpace) -> np.ndarray:
    """
    U = exp[k a^dag a (b^dag - b)], built blockwise as sum_n |n><n| x D(k n).

    U H_RF U^dag removes the linear coupling when Omega = 0.
    """
    blocks = [displacement_operator(params.k * n, space.dim_mech).matrix for n in range(space.dim_cavity)]
    u = np.zeros((space.dim, space.dim), dtype=complex)
    for n, block in enumerate(blocks):
        sl = slice(n * space.dim_mech, (n + 1) * space.dim_mech)
        u[sl, sl] = block
    return u


def energy_level(n_cav: int, n_mech: int, params: SystemParams) -> float:
    """E(n_c, n_m) = -Delta n_c + omega_m n_m - (g^2/omega_m) n_c^2."""
    return -params.delta * n_cav + params.omega_m * n_mech - (params.g ** 2 / params.omega_m) * n_cav ** 2


def detuning_for_regime(regime: Union[DetuningRegime, int], g: float, omega_m: float) -> float:
    n = regime.n if isinstance(regime, DetuningRegime) else DetuningRegime(int(regime)).n
    if omega_m <= 0:
        raise ValueError(f"omega_m must be positive, got {omega_m}")
    return -n * g ** 2 / omega_m


def nonlinearity_check(params: SystemParams) -> Tuple[float, float, bool]:
    """(g/kappa, g^2/(omega_m kappa), both > 1)."""
    kappa = params.kappa
    if kappa <= 0:
        raise ValueError(f"Total decay kappa must be positive, got {kappa}")
    ratio = params.g / kappa
    kerr = params.g ** 2 / (params.omega_m * kappa)
    return ratio, kerr, bool(ratio > 1 and kerr > 1)


def h_no_photon(params: SystemParams, space: FockSpace, damping: Optional[float] = None) -> Operator:
    """
    H_RF - i (damping/2) a^dag a.

    `damping` defaults to kappa_d; conditional likelihoods pass the full kappa.
    """
    rate = params.kappa_d if damping is None else float(damping)
    h = hamiltonian_rf(params, space).matrix - 0.5j * rate * joint_operators(space).n_a
    return Operator(h, Mode.JOINT)
