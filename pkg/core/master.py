"""
Deterministic open-system propagation.

Three generators share one effective Hamiltonian
    H_eff = H_RF - (i/2)[kappa a^dag a + gamma(mbar+1) b^dag b + gamma mbar b b^dag]
and differ in which refill terms L rho L^dag they keep:

    master    kappa a.a^dag, gamma(mbar+1) b.b^dag, gamma mbar b^dag.b   (trace preserving)
    no_click  kappa_l a.a^dag and the two phonon terms                    (trace = P(no detection))
    no_jump   none                                                        (every channel monitored)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm

from core.errors import InvalidStateError, ZeroNormError
from core.hamiltonians import hamiltonian_rf, joint_operators
from core.integrators import DEFAULT_CONTROL, StepControl, assert_positive, hermitize, propagate
from models.params import SystemParams
from models.records import Channel
from models.space import FockSpace, State, check_space

logger = logging.getLogger(__name__)

JUMP_TRACE_FLOOR = 1e-14
CACHE_WARN_DIM = 64


class GeneratorKind(str, Enum):
    MASTER = "master"
    NO_CLICK = "no_click"
    NO_JUMP = "no_jump"


@dataclass(frozen=True, eq=False)
class Generator:
    """Right-hand side -i(H_eff rho - rho H_eff^dag) + sum_j r_j L_j rho L_j^dag."""
    h_eff: np.ndarray
    refills: Tuple[Tuple[float, np.ndarray], ...]
    kind: GeneratorKind

    def __post_init__(self):
        object.__setattr__(self, "_h_dag", self.h_eff.conj().T)
        object.__setattr__(
            self, "_refills", tuple((r, L, L.conj().T) for r, L in self.refills if r > 0)
        )

    @property
    def dim(self) -> int:
        return self.h_eff.shape[0]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.h_eff @ rho - rho @ self._h_dag)
        for rate, L, Ld in self._refills:
            out = out + rate * (L @ rho @ Ld)
        return out

    def vector_rhs(self, psi: np.ndarray) -> np.ndarray:
        """Schroedinger form for pure states (refills ignored)."""
        return -1j * (self.h_eff @ psi)

    def superoperator(self) -> np.ndarray:
        """Row-major vectorisation: vec(A rho B) = (A kron B^T) vec(rho)."""
        d = self.dim
        eye = np.eye(d)
        sup = -1j * np.kron(self.h_eff, eye) + 1j * np.kron(eye, self.h_eff.conj())
        for rate, L, _ in self._refills:
            sup = sup + rate * np.kron(L, L.conj())
        return sup


@lru_cache(maxsize=64)
def build_generator(params: SystemParams, space: FockSpace, kind: GeneratorKind) -> Generator:
    ops = joint_operators(space)
    kind = GeneratorKind(kind)
    down = params.gamma * (params.mbar + 1.0)
    up = params.gamma * params.mbar
    decay = params.kappa * ops.n_a + down * ops.n_b + up * (ops.b @ ops.bd)
    h_eff = hamiltonian_rf(params, space).matrix - 0.5j * decay
    if kind == GeneratorKind.MASTER:
        refills = ((params.kappa, ops.a), (down, ops.b), (up, ops.bd))
    elif kind == GeneratorKind.NO_CLICK:
        refills = ((params.kappa_l, ops.a), (down, ops.b), (up, ops.bd))
    else:
        refills = ()
    return Generator(h_eff=h_eff, refills=refills, kind=kind)


def _density(state: State, space: FockSpace) -> np.ndarray:
    check_space(state, space)
    return state.density()


def lindblad_rhs(state: State, params: SystemParams, space: FockSpace) -> np.ndarray:
    """Ensemble master-equation derivative."""
    return build_generator(params, space, GeneratorKind.MASTER)(_density(state, space))


def no_click_rhs(state: State, params: SystemParams, space: FockSpace) -> np.ndarray:
    """Derivative of the unnormalised no-detection state; d(trace)/dt = -kappa_d <a^dag a>."""
    return build_generator(params, space, GeneratorKind.NO_CLICK)(_density(state, space))


@dataclass(frozen=True, eq=False)
class PropagatorCache:
    """
    exp(L * step) for one generator; shared read-only between tasks.

    `advance` applies the cached map floor(duration/step) times and integrates
    the remainder with RK4.
    """
    key: Tuple
    step: float
    generator: Generator
    propagator: np.ndarray

    @classmethod
    def build(
        cls,
        params: SystemParams,
        space: FockSpace,
        step: float,
        kind: GeneratorKind = GeneratorKind.NO_CLICK,
    ) -> "PropagatorCache":
        if space.dim > CACHE_WARN_DIM:
            logger.warning(
                f"Propagator cache for joint dimension {space.dim} holds a {space.dim ** 2}^2 dense matrix"
            )
        gen = build_generator(params, space, kind)
        prop = expm(gen.superoperator() * step)
        return cls(key=cls.make_key(params, space, step, kind), step=float(step), generator=gen, propagator=prop)

    @staticmethod
    def make_key(params: SystemParams, space: FockSpace, step: float, kind: GeneratorKind) -> Tuple:
        return (params.fingerprint(), space.dim_cavity, space.dim_mech, float(step), GeneratorKind(kind).value)

    def is_valid_for(self, params: SystemParams, space: FockSpace, step: float, kind: GeneratorKind) -> bool:
        return self.key == self.make_key(params, space, step, kind)

    def advance(self, rho: np.ndarray, duration: float, control: StepControl = DEFAULT_CONTROL) -> np.ndarray:
        d = rho.shape[0]
        n_steps = int(np.floor(duration / self.step + 1e-9))
        vec = rho.reshape(-1)
        for _ in range(n_steps):
            vec = self.propagator @ vec
        out = hermitize(vec.reshape(d, d))
        remainder = duration - n_steps * self.step
        if remainder > 1e-12:
            out = propagate(self.generator, out, remainder, control)
        return out


def _integrate(
    gen: Generator,
    rho: np.ndarray,
    times: Sequence[float],
    t0: float,
    control: StepControl,
    cache: Optional[PropagatorCache] = None,
) -> List[np.ndarray]:
    out: List[np.ndarray] = []
    t = float(t0)
    for target in times:
        if target < t - 1e-12:
            raise ValueError(f"Checkpoint times must be non-decreasing and >= t0 (got {target} after {t})")
        duration = max(0.0, float(target) - t)
        if duration > 0:
            rho = cache.advance(rho, duration, control) if cache is not None else propagate(gen, rho, duration, control)
        t = max(t, float(target))
        out.append(rho)
    if control.check_positivity and out:
        assert_positive(out[-1])
    return out


def integrate_master(
    initial: State,
    t0: float,
    t1: float,
    params: SystemParams,
    space: FockSpace,
    step_control: StepControl = DEFAULT_CONTROL,
) -> State:
    """Ensemble density at t1 from the density (or vector) at t0."""
    if t1 < t0:
        raise ValueError(f"t1 ({t1}) must be >= t0 ({t0})")
    rho = _density(initial, space)
    if t1 == t0:
        return State.mixed(rho, initial.normalized)
    gen = build_generator(params, space, GeneratorKind.MASTER)
    return State.mixed(_integrate(gen, rho, [t1], t0, step_control)[-1], initial.normalized)


def propagate_master(
    initial: State,
    times: Sequence[float],
    params: SystemParams,
    space: FockSpace,
    step_control: StepControl = DEFAULT_CONTROL,
    t0: float = 0.0,
) -> List[State]:
    """Ensemble densities at every checkpoint, integrated in one pass."""
    gen = build_generator(params, space, GeneratorKind.MASTER)
    return [State.mixed(r) for r in _integrate(gen, _density(initial, space), times, t0, step_control)]


def integrate_no_click(
    initial: State,
    t0: float,
    t1: float,
    params: SystemParams,
    space: FockSpace,
    step_control: StepControl = DEFAULT_CONTROL,
    use_cache: bool = False,
    cache: Optional[PropagatorCache] = None,
) -> State:
    """Unnormalised conditional state after [t0, t1] without detections."""
    if t1 < t0:
        raise ValueError(f"t1 ({t1}) must be >= t0 ({t0})")
    rho = _density(initial, space)
    if t1 == t0:
        return State.mixed(rho, normalized=False)
    gen = build_generator(params, space, GeneratorKind.NO_CLICK)
    if use_cache and (cache is None or not cache.is_valid_for(params, space, step_control.step, GeneratorKind.NO_CLICK)):
        cache = PropagatorCache.build(params, space, step_control.step, GeneratorKind.NO_CLICK)
    if not use_cache:
        cache = None
    return State.mixed(_integrate(gen, rho, [t1], t0, step_control, cache)[-1], normalized=False)


def propagate_no_click(
    initial: State,
    times: Sequence[float],
    params: SystemParams,
    space: FockSpace,
    step_control: StepControl = DEFAULT_CONTROL,
    t0: float = 0.0,
    cache: Optional[PropagatorCache] = None,
) -> List[State]:
    gen = build_generator(params, space, GeneratorKind.NO_CLICK)
    rhos = _integrate(gen, _density(initial, space), times, t0, step_control, cache)
    return [State.mixed(r, normalized=False) for r in rhos]


def jump_operator(channel: Channel, space: FockSpace) -> np.ndarray:
    ops = joint_operators(space)
    channel = Channel(channel)
    if channel in (Channel.PHOTON_DETECTED, Channel.PHOTON_LOST):
        return ops.a
    if channel == Channel.PHONON_DOWN:
        return ops.b
    return ops.bd


def apply_jump(state: State, channel: Channel, space: FockSpace) -> State:
    """L rho L^dag / Tr(L^dag L rho) (or L psi / ||L psi|| for vectors)."""
    check_space(state, space)
    L = jump_operator(channel, space)
    if state.is_pure:
        out = L @ state.data
        norm2 = float(np.vdot(out, out).real)
        if norm2 <= JUMP_TRACE_FLOOR * max(state.trace(), 1e-300):
            raise ZeroNormError(f"{Channel(channel).value} jump impossible from this state")
        return State.pure(out / np.sqrt(norm2))
    out = L @ state.data @ L.conj().T
    tr = float(np.trace(out).real)
    if tr <= JUMP_TRACE_FLOOR * max(state.trace(), 1e-300):
        raise ZeroNormError(f"{Channel(channel).value} jump impossible from this state (trace {tr:.2e})")
    return State.mixed(hermitize(out / tr))


def renormalize(rho: np.ndarray) -> Tuple[np.ndarray, float]:
    """(rho / Tr rho, Tr rho) for densities."""
    tr = float(np.trace(rho).real)
    if tr <= 0:
        raise InvalidStateError(f"Cannot renormalise density with trace {tr}")
    return rho / tr, tr
