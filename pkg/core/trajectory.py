"""
Stochastic click-record sampling and deterministic conditional replay.

Waiting times come from inverse-transform sampling on the decaying norm
(full mode, pure states) or trace (detector mode, densities): draw
u ~ U(0,1), propagate the unnormalised state until its norm^2/trace reaches
u, and bisect the crossing step down to JUMP_TIME_RESOLUTION.

Random numbers come from counter-based Philox substreams keyed by
(master seed, trajectory index), so record i is the same whichever worker
produces it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import RecordMismatchError, TruncationError
from core.fock import truncation_leakage
from core.hamiltonians import joint_operators
from core.integrators import DEFAULT_CONTROL, StepControl, controlled_step, hermitize, propagate, rk4_step
from core.jobs import WorkerPool
from core.master import GeneratorKind, apply_jump, build_generator, renormalize
from models.params import SystemParams
from models.records import Channel, ClickEvent, ClickRecord, UnravellingMode
from models.space import FockSpace, State, check_space

logger = logging.getLogger(__name__)

JUMP_TIME_RESOLUTION = 1e-6
LEAKAGE_LIMIT = 1e-2
LEAKAGE_CHECK_EVERY = 50
RNG_ALGORITHM = "numpy.Philox(SeedSequence(master_seed, spawn_key=(index,)))"


def substream(master_seed: int, index: int) -> np.random.Generator:
    """Per-trajectory generator; see RNG_ALGORITHM."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))


@dataclass
class TrajectoryResult:
    record: ClickRecord
    state: State
    snapshots: List[State] = field(default_factory=list)  # normalised states at requested checkpoints
    snapshot_times: List[float] = field(default_factory=list)


def _check_leakage(y: np.ndarray, space: FockSpace, pure: bool, t: float) -> None:
    state = State.pure(y) if pure else State.mixed(y)
    cav, mech = truncation_leakage(state, space)
    if max(cav, mech) > LEAKAGE_LIMIT:
        raise TruncationError(
            f"Truncation leakage at t={t:.4f}: cavity {cav:.2e}, mech {mech:.2e} exceed {LEAKAGE_LIMIT:.0e}"
        )


def _weight(y: np.ndarray, pure: bool) -> float:
    if pure:
        return float(np.vdot(y, y).real)
    return float(np.trace(y).real)


def _sample_pure(initial: State, rng: np.random.Generator) -> np.ndarray:
    """Pure member of the initial ensemble drawn from its eigen-decomposition."""
    if initial.is_pure:
        return initial.data / np.linalg.norm(initial.data)
    lam, vecs = np.linalg.eigh(hermitize(initial.data))
    p = np.clip(lam, 0.0, None)
    p = p / p.sum()
    idx = int(np.searchsorted(np.cumsum(p), rng.random(), side="right"))
    idx = min(idx, len(p) - 1)
    return vecs[:, idx].astype(complex)


def _choose_channel(psi: np.ndarray, params: SystemParams, space: FockSpace, rng: np.random.Generator) -> Channel:
    ops = joint_operators(space)
    n_a = float(np.vdot(psi, ops.n_a @ psi).real)
    n_b = float(np.vdot(psi, ops.n_b @ psi).real)
    weights = np.array(
        [
            params.kappa * n_a,
            params.gamma * (params.mbar + 1.0) * n_b,
            params.gamma * params.mbar * (n_b + 1.0),
        ]
    )
    weights = np.clip(weights, 0.0, None)
    pick = rng.random() * weights.sum()
    if pick < weights[0]:
        if rng.random() * params.kappa < params.kappa_d:
            return Channel.PHOTON_DETECTED
        return Channel.PHOTON_LOST
    if pick < weights[0] + weights[1]:
        return Channel.PHONON_DOWN
    return Channel.PHONON_UP


def _simulate(
    params: SystemParams,
    space: FockSpace,
    initial: State,
    t_end: float,
    mode: UnravellingMode,
    master_seed: int,
    index: int,
    control: StepControl,
    checkpoints: Sequence[float] = (),
) -> TrajectoryResult:
    mode = UnravellingMode(mode)
    check_space(initial, space)
    if t_end <= 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    rng = substream(master_seed, index)
    pure = mode == UnravellingMode.FULL
    if pure:
        gen = build_generator(params, space, GeneratorKind.NO_JUMP)
        f: Callable[[np.ndarray], np.ndarray] = gen.vector_rhs
        y = _sample_pure(initial, rng)
    else:
        gen = build_generator(params, space, GeneratorKind.NO_CLICK)
        f = gen
        y = renormalize(initial.density())[0]

    pending = sorted(float(c) for c in checkpoints if 0 <= c <= t_end)
    snapshots: List[State] = []
    snapshot_times: List[float] = []
    events: List[ClickEvent] = []
    t = 0.0
    u = rng.random()
    steps = 0
    eps = 1e-12 * max(1.0, t_end)

    def snapshot(yv: np.ndarray) -> State:
        w = _weight(yv, pure)
        return State.pure(yv / np.sqrt(w)) if pure else State.mixed(yv / w)

    while pending and pending[0] <= t + eps:
        snapshots.append(snapshot(y))
        snapshot_times.append(pending.pop(0))

    while t < t_end - eps:
        limit = min(t_end, pending[0]) if pending else t_end
        h = min(control.step, limit - t)
        y_new, taken = controlled_step(f, y, h, control)
        if not pure:
            y_new = hermitize(y_new)
        steps += 1
        if _weight(y_new, pure) <= u:
            lo, hi = 0.0, taken
            while hi - lo > JUMP_TIME_RESOLUTION:
                mid = 0.5 * (lo + hi)
                if _weight(rk4_step(f, y, mid), pure) <= u:
                    hi = mid
                else:
                    lo = mid
            y_jump = rk4_step(f, y, hi)
            t_jump = t + hi
            if events and t_jump <= events[-1].time:
                t_jump = float(np.nextafter(events[-1].time, np.inf))
            _check_leakage(y_jump, space, pure, t_jump)
            if pure:
                psi = y_jump / np.sqrt(_weight(y_jump, True))
                channel = _choose_channel(psi, params, space, rng)
                y = apply_jump(State.pure(psi), channel, space).data
            else:
                channel = Channel.PHOTON_DETECTED
                y = apply_jump(State.mixed(y_jump / _weight(y_jump, False)), channel, space).data
            events.append(ClickEvent(time=t_jump, channel=channel))
            t = t_jump
            u = rng.random()
            continue
        y = y_new
        t += taken
        if steps % LEAKAGE_CHECK_EVERY == 0:
            _check_leakage(y, space, pure, t)
        while pending and pending[0] <= t + eps:
            snapshots.append(snapshot(y))
            snapshot_times.append(pending.pop(0))

    _check_leakage(y, space, pure, t_end)
    record = ClickRecord(
        events=events,
        t_end=float(t_end),
        seed=int(master_seed),
        params_fingerprint=params.fingerprint(),
        mode=mode,
        dim_cavity=space.dim_cavity,
        dim_mech=space.dim_mech,
        stream=int(index),
    )
    return TrajectoryResult(record=record, state=snapshot(y), snapshots=snapshots, snapshot_times=snapshot_times)


def sample_trajectory(
    params: SystemParams,
    space: FockSpace,
    initial: State,
    t_end: float,
    mode: Union[UnravellingMode, str] = UnravellingMode.DETECTOR,
    seed: int = 0,
    stream: int = 0,
    step_control: StepControl = DEFAULT_CONTROL,
) -> Tuple[ClickRecord, State]:
    """One click record and the final normalised conditional state."""
    result = _simulate(params, space, initial, t_end, UnravellingMode(mode), seed, stream, step_control)
    return result.record, result.state


def _ensemble_task(args: tuple) -> TrajectoryResult:
    params, space, initial, t_end, mode, master_seed, index, control, checkpoints = args
    return _simulate(params, space, initial, t_end, mode, master_seed, index, control, checkpoints)


def sample_ensemble(
    params: SystemParams,
    space: FockSpace,
    initial: State,
    t_end: float,
    n_trajectories: int,
    mode: Union[UnravellingMode, str] = UnravellingMode.DETECTOR,
    master_seed: int = 0,
    pool: Optional[WorkerPool] = None,
    step_control: StepControl = DEFAULT_CONTROL,
    checkpoints: Sequence[float] = (),
) -> List[TrajectoryResult]:
    """Independent trajectories 0..n-1, returned in index order."""
    pool = pool or WorkerPool(1)
    mode = UnravellingMode(mode)
    tasks = [
        (params, space, initial, t_end, mode, master_seed, i, step_control, tuple(checkpoints))
        for i in range(int(n_trajectories))
    ]
    results = pool.map(_ensemble_task, tasks, label="trajectories")
    clicks = [r.record.click_count() for r in results]
    logger.info(
        f"Sampled {len(results)} {mode.value} trajectories to t={t_end}: mean clicks {np.mean(clicks):.1f}"
    )
    return results


def check_record(record: ClickRecord, params: SystemParams, space: FockSpace) -> None:
    if record.params_fingerprint and record.params_fingerprint != params.fingerprint():
        raise RecordMismatchError(
            f"Record fingerprint {record.params_fingerprint} does not match parameters {params.fingerprint()}"
        )
    if record.dim_cavity and (record.dim_cavity, record.dim_mech) != (space.dim_cavity, space.dim_mech):
        raise RecordMismatchError(
            f"Record space ({record.dim_cavity}, {record.dim_mech}) differs from {space}"
        )


def replay_conditional(
    record: ClickRecord,
    params: SystemParams,
    space: FockSpace,
    initial: State,
    checkpoints: Sequence[float],
    step_control: StepControl = DEFAULT_CONTROL,
    strict: bool = True,
) -> List[State]:
    """
    Normalised conditional densities at each checkpoint, in the order given.

    States are right-continuous: a checkpoint coinciding with an event sees
    the post-jump state. `strict=False` skips the fingerprint check, which
    lets bounds replay one record at neighbouring parameter values.
    """
    if strict:
        check_record(record, params, space)
    check_space(initial, space)
    kind = GeneratorKind.NO_CLICK if record.mode == UnravellingMode.DETECTOR else GeneratorKind.NO_JUMP
    gen = build_generator(params, space, kind)
    rho = renormalize(initial.density())[0]
    t = 0.0
    requested = [float(c) for c in checkpoints]
    order = sorted(range(len(requested)), key=requested.__getitem__)
    if requested and requested[order[0]] < 0:
        raise ValueError(f"Checkpoints must be >= 0, got {requested[order[0]]}")
    out: List[Optional[State]] = [None] * len(requested)
    events = list(record.events)
    ei = 0
    for index in order:
        target = requested[index]
        while ei < len(events) and events[ei].time <= target:
            ev = events[ei]
            rho = renormalize(propagate(gen, rho, ev.time - t, step_control))[0]
            rho = apply_jump(State.mixed(rho), ev.channel, space).data
            t = ev.time
            ei += 1
        rho = renormalize(propagate(gen, rho, target - t, step_control))[0]
        t = target
        out[index] = State.mixed(rho)
    return out
