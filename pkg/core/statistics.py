"""
Photon-correlation diagnostics and the negativity entanglement witness.
"""

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import RecordMismatchError, UndefinedCorrelationError
from core.fock import partial_transpose_mech
from core.hamiltonians import joint_operators
from core.integrators import DEFAULT_CONTROL, StepControl
from core.jobs import WorkerPool
from core.master import integrate_master, propagate_master
from core.trajectory import replay_conditional
from models.params import SystemParams
from models.records import ClickRecord
from models.results import G2Grid, NegativitySeries, ZetaMap
from models.space import FockSpace, State, check_space

logger = logging.getLogger(__name__)

DEFAULT_BINS = 25
EMISSION_FLOOR = 1e-14

Bins = Union[int, Sequence[float], np.ndarray]


# ---------------------------------------------------------------------------
# Next-emission histogram
# ---------------------------------------------------------------------------

def consecutive_pairs(record: ClickRecord) -> np.ndarray:
    """(t_i, t_{i+1}) for consecutive detected photons, shape (n, 2)."""
    times = record.photon_times()
    if len(times) < 2:
        return np.empty((0, 2))
    return np.column_stack([times[:-1], times[1:]])


def _edges(bins: Bins, upper: float) -> np.ndarray:
    if isinstance(bins, (int, np.integer)):
        return np.linspace(0.0, upper, int(bins) + 1)
    edges = np.asarray(bins, dtype=float)
    if edges.ndim != 1 or len(edges) < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("Bin edges must be a strictly increasing 1-D array with at least two entries")
    return edges


def zeta_histogram(
    records: Sequence[ClickRecord],
    t1_bins: Bins = DEFAULT_BINS,
    t2_bins: Bins = DEFAULT_BINS,
    relative: bool = False,
    dt_max: Optional[float] = None,
) -> ZetaMap:
    """
    zeta(t1, t2) = N_{t1,t2} / N_tot over consecutive photon pairs.

    With `relative`, the second axis is the waiting time dt = t2 - t1
    (range [0, dt_max], default t_end). Bins without data are NaN, so the
    filled bins sum to one.
    """
    records = list(records)
    if not records:
        raise ValueError("zeta_histogram needs at least one record")
    fingerprints = {r.params_fingerprint for r in records}
    if len(fingerprints) > 1:
        raise RecordMismatchError(f"Records come from different parameters: {sorted(fingerprints)}")
    t_end = max(r.t_end for r in records)
    pairs = np.vstack([consecutive_pairs(r) for r in records])
    first = pairs[:, 0]
    second = pairs[:, 1] - pairs[:, 0] if relative else pairs[:, 1]
    e1 = _edges(t1_bins, t_end)
    e2 = _edges(t2_bins, (dt_max or t_end) if relative else t_end)
    counts, _, _ = np.histogram2d(first, second, bins=[e1, e2])
    total = counts.sum()
    values = np.full(counts.shape, np.nan)
    if total > 0:
        filled = counts > 0
        values[filled] = counts[filled] / total
    return ZetaMap(
        values=values,
        t1_edges=e1,
        t2_edges=e2,
        relative=relative,
        pair_count=int(total),
        fingerprint=records[0].params_fingerprint,
    )


def zeta_difference(a: ZetaMap, b: ZetaMap) -> ZetaMap:
    """a - b with absent bins counted as zero where the other map has data."""
    if a.values.shape != b.values.shape or not np.allclose(a.t2_edges, b.t2_edges):
        raise ValueError("zeta maps must share their binning")
    both_absent = np.isnan(a.values) & np.isnan(b.values)
    diff = np.nan_to_num(a.values) - np.nan_to_num(b.values)
    diff[both_absent] = np.nan
    return ZetaMap(diff, a.t1_edges, a.t2_edges, a.relative, a.pair_count + b.pair_count, "")


def band_mean(zmap: ZetaMap, dt_min: float, dt_max: float) -> float:
    """Mean over present bins whose waiting time lies in [dt_min, dt_max]."""
    if zmap.relative:
        dt = np.broadcast_to(zmap.t2_centers[None, :], zmap.values.shape)
    else:
        dt = zmap.t2_centers[None, :] - zmap.t1_centers[:, None]
    mask = (dt >= dt_min) & (dt <= dt_max) & ~np.isnan(zmap.values)
    if not mask.any():
        return float("nan")
    return float(zmap.values[mask].mean())


# ---------------------------------------------------------------------------
# Second-order correlation
# ---------------------------------------------------------------------------

def _emission(rho: np.ndarray, n_a: np.ndarray) -> float:
    return float(np.trace(n_a @ rho).real)


def g2(
    t1: float,
    t2: float,
    params: SystemParams,
    space: FockSpace,
    initial: State,
    step_control: StepControl = DEFAULT_CONTROL,
) -> float:
    """
    Tr(A T_{t2,t1} A T_{t1,0} rho0) / [Tr(A T_{t1,0} rho0) Tr(A T_{t2,0} rho0)], A[rho] = a rho a^dag.
    """
    if not (t2 >= t1 >= 0):
        raise ValueError(f"g2 needs t2 >= t1 >= 0, got t1={t1}, t2={t2}")
    grid = g2_row(t1, [t2 - t1], params, space, initial, step_control)
    if np.isnan(grid[0]):
        raise UndefinedCorrelationError(f"No emission probability at t1={t1} or t2={t2}")
    return float(grid[0])


def g2_row(
    t1: float,
    dt_values: Sequence[float],
    params: SystemParams,
    space: FockSpace,
    initial: State,
    step_control: StepControl = DEFAULT_CONTROL,
) -> np.ndarray:
    """g2(t1, t1 + dt) for every dt; NaN where the denominator vanishes."""
    n_a = joint_operators(space).n_a
    a = joint_operators(space).a
    rho1 = integrate_master(initial, 0.0, t1, params, space, step_control).data
    first = _emission(rho1, n_a)
    dts = np.asarray(dt_values, dtype=float)
    out = np.full(len(dts), np.nan)
    if first <= EMISSION_FLOOR:
        return out
    order = np.argsort(dts)
    jumped = a @ rho1 @ a.conj().T / first
    times = t1 + dts[order]
    after_jump = propagate_master(State.mixed(jumped), times, params, space, step_control, t0=t1)
    unjumped = propagate_master(State.mixed(rho1), times, params, space, step_control, t0=t1)
    for slot, j, u in zip(order, after_jump, unjumped):
        second = _emission(u.data, n_a)
        if second <= EMISSION_FLOOR:
            continue
        # numerator = first * Tr(n_a T(jumped)); denominator = first * second
        out[slot] = _emission(j.data, n_a) / second
    return out


def _g2_row_task(args: tuple) -> np.ndarray:
    return g2_row(*args)


def g2_grid(
    t1_values: Sequence[float],
    dt_values: Sequence[float],
    params: SystemParams,
    space: FockSpace,
    initial: State,
    step_control: StepControl = DEFAULT_CONTROL,
    pool: Optional[WorkerPool] = None,
) -> G2Grid:
    pool = pool or WorkerPool(1)
    rows = pool.map(
        _g2_row_task,
        [(float(t1), list(dt_values), params, space, initial, step_control) for t1 in t1_values],
        label="g2 rows",
    )
    return G2Grid(
        t1=np.asarray(t1_values, dtype=float),
        dt=np.asarray(dt_values, dtype=float),
        values=np.vstack(rows),
        fingerprint=params.fingerprint(),
    )


def sampled_g2(records: Sequence[ClickRecord], t1: float, t2: float, window: float) -> Tuple[float, float]:
    """
    Pair-coincidence estimate E[N1 N2] / (E[N1] E[N2]) from click counts in
    [t1, t1+window) and [t2, t2+window); returns (value, jackknife standard error).
    """
    times = [r.photon_times() for r in records]
    n1 = np.array([np.count_nonzero((t >= t1) & (t < t1 + window)) for t in times], dtype=float)
    n2 = np.array([np.count_nonzero((t >= t2) & (t < t2 + window)) for t in times], dtype=float)
    if n1.sum() == 0 or n2.sum() == 0:
        raise UndefinedCorrelationError(f"No clicks sampled in windows at t1={t1}, t2={t2}")

    def estimate(mask: np.ndarray) -> float:
        return float(np.mean(n1[mask] * n2[mask]) / (np.mean(n1[mask]) * np.mean(n2[mask])))

    m = len(records)
    full = estimate(np.ones(m, dtype=bool))
    leave_one = []
    for i in range(m):
        mask = np.ones(m, dtype=bool)
        mask[i] = False
        if n1[mask].sum() > 0 and n2[mask].sum() > 0:
            leave_one.append(estimate(mask))
    loo = np.array(leave_one)
    stderr = float(np.sqrt((len(loo) - 1) / len(loo) * np.sum((loo - loo.mean()) ** 2))) if len(loo) > 1 else float("inf")
    return full, stderr


# ---------------------------------------------------------------------------
# Negativity
# ---------------------------------------------------------------------------

def negativity_raw(state: State, space: FockSpace) -> float:
    """(||rho^T_M||_1 - 1)/2 without clamping, for the normalised state."""
    check_space(state, space)
    rho = state.density()
    rho = rho / np.trace(rho).real
    pt = partial_transpose_mech(State.mixed(rho), space).matrix
    eig = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float((np.abs(eig).sum() - 1.0) / 2.0)


def negativity(state: State, space: FockSpace) -> float:
    return max(0.0, negativity_raw(state, space))


def negativity_series(
    record: ClickRecord,
    params: SystemParams,
    space: FockSpace,
    initial: State,
    times: Sequence[float],
    click_offset: float = 0.01,
    step_control: StepControl = DEFAULT_CONTROL,
) -> NegativitySeries:
    """Negativity along the replayed conditional state, plus values just before/after each click."""
    clicks = record.photon_times()
    before = np.clip(clicks - click_offset, 0.0, None)
    after = np.clip(clicks + click_offset, None, record.t_end)
    grid = np.asarray(times, dtype=float)
    marks = np.concatenate([grid, before, after])
    order = np.argsort(marks, kind="stable")
    states = replay_conditional(record, params, space, initial, marks[order], step_control)
    values = np.empty(len(marks))
    raws = np.empty(len(marks))
    for slot, st in zip(order, states):
        raws[slot] = negativity_raw(st, space)
        values[slot] = max(0.0, raws[slot])
    n = len(grid)
    k = len(clicks)
    return NegativitySeries(
        times=grid,
        negativity=values[:n],
        raw=raws[:n],
        click_times=tuple(float(c) for c in clicks),
        before_click=values[n:n + k],
        after_click=values[n + k:],
    )
