"""
Bayesian inference of one system parameter from a photon-click record.

The likelihood of a detector record D_t = {t_1 < ... < t_N} on [0, T] is

    P(D|theta) = P_no(T, t_N) * prod_n P_no(t_n - dt, t_{n-1}) * kappa_d <a^dag a>(t_n^-) dt,

where P_no is the trace of the unnormalised no-click state and each click
resets rho -> a rho a^dag / Tr. Everything is accumulated in log space and the
conditional state is renormalised after every segment.
"""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import i0e

from core.errors import DegeneratePosteriorError, RecordMismatchError
from core.fock import initial_state
from core.hamiltonians import detuning_for_regime, joint_operators
from core.integrators import DEFAULT_CONTROL, StepControl, propagate
from core.jobs import WorkerPool
from core.master import GeneratorKind, PropagatorCache, apply_jump, build_generator, renormalize
from models.params import REAL_FIELDS, SystemParams
from models.records import ClickRecord, UnravellingMode
from models.results import MseMode, MseSeries, ParameterGrid, PriorSpec
from models.space import FockSpace, State

logger = logging.getLogger(__name__)

DEFAULT_DT_BIN = 0.01
DEFAULT_GRID_NODES = 81
DEFAULT_CACHE_STEP = 0.1
DT_CONVERGENCE_TOL = 1e-3


# ---------------------------------------------------------------------------
# Prior
# ---------------------------------------------------------------------------

def _log_normaliser(alpha: float) -> float:
    """log(exp(alpha/2) I0(alpha/2)), stable for large |alpha|."""
    half = 0.5 * alpha
    return half + abs(half) + math.log(i0e(half))


def prior_density(theta: Union[float, np.ndarray], spec: PriorSpec) -> Union[float, np.ndarray]:
    """
    P(theta) = [exp(alpha s) - 1] / [exp(alpha/2) I0(alpha/2) - 1] / (theta_max - theta_min),
    s = sin^2(pi (theta - theta_min)/(theta_max - theta_min)); zero outside the support.
    """
    th = np.asarray(theta, dtype=float)
    x = (th - spec.theta_min) / spec.width
    inside = (x >= 0.0) & (x <= 1.0)
    s = np.sin(np.pi * np.clip(x, 0.0, 1.0)) ** 2
    # sin(pi) is not exactly zero in floating point
    s = np.where((x <= 0.0) | (x >= 1.0), 0.0, s)
    a = spec.alpha
    if a == 0:
        shape = 2.0 * s
    elif a < 0:
        shape = np.expm1(a * s) / math.expm1(_log_normaliser(a))
    else:
        big = _log_normaliser(a)
        # exp(a s - L) (1 - e^{-a s}) / (1 - e^{-L}) avoids overflow for large a
        with np.errstate(divide="ignore"):
            shape = np.exp(a * s - big) * (-np.expm1(-a * s)) / (-math.expm1(-big))
    out = np.where(inside, shape / spec.width, 0.0)
    if np.ndim(theta) == 0:
        return float(out)
    return out


def log_prior(theta: Union[float, np.ndarray], spec: PriorSpec) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(prior_density(np.asarray(theta, dtype=float), spec))


def make_grid(which_parameter: str, spec: PriorSpec, nodes: int = DEFAULT_GRID_NODES) -> ParameterGrid:
    """Uniform grid over the prior support with the closed-form log prior."""
    xs = np.linspace(spec.theta_min, spec.theta_max, int(nodes))
    lp = log_prior(xs, spec)
    zeros = np.zeros_like(xs)
    return ParameterGrid(which_parameter, xs, lp, zeros, normalize_log_posterior(xs, lp), 0.0)


def normalize_log_posterior(nodes: np.ndarray, log_unnormalized: np.ndarray) -> np.ndarray:
    finite = np.isfinite(log_unnormalized)
    if not finite.any():
        raise DegeneratePosteriorError("Every grid node has zero posterior weight")
    peak = float(np.max(log_unnormalized[finite]))
    w = np.exp(log_unnormalized - peak)
    z = float(trapezoid(w, nodes))
    if not z > 0:
        raise DegeneratePosteriorError("Posterior normalisation vanished under quadrature")
    return log_unnormalized - peak - math.log(z)


# ---------------------------------------------------------------------------
# Likelihood
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ThetaSubstitution:
    """
    How a candidate theta enters the sensor model.

    Delta stays at the template value unless `couple_detuning_regime` is set
    and theta is g, in which case Delta = -n theta^2 / omega_m.
    """
    which: str = "g"
    couple_detuning_regime: Optional[int] = None

    def __post_init__(self):
        if self.which not in REAL_FIELDS:
            raise ValueError(f"Cannot infer '{self.which}'; choose one of {REAL_FIELDS}")

    def apply(self, template: SystemParams, theta: float) -> SystemParams:
        params = template.with_updates(**{self.which: float(theta)})
        if self.couple_detuning_regime is not None and self.which == "g":
            params = params.with_updates(
                delta=detuning_for_regime(self.couple_detuning_regime, params.g, params.omega_m)
            )
        return params


class LikelihoodTracker:
    """
    Incremental log-likelihood of one record at one parameter point.

    Holds the normalised conditional state at `t`; `advance_to` consumes the
    clicks up to the target time and returns log P(record on [0, target]).
    """

    def __init__(
        self,
        record: ClickRecord,
        params: SystemParams,
        space: FockSpace,
        initial: Optional[State] = None,
        dt_bin: float = DEFAULT_DT_BIN,
        step_control: StepControl = DEFAULT_CONTROL,
        cache: Optional[PropagatorCache] = None,
    ):
        if record.mode != UnravellingMode.DETECTOR:
            logger.debug("Likelihood of a full-mode record uses its detected photons only")
        if dt_bin <= 0:
            raise ValueError(f"dt_bin must be positive, got {dt_bin}")
        self.record = record
        self.params = params
        self.space = space
        self.dt_bin = float(dt_bin)
        self.control = step_control
        self.cache = cache
        self.generator = build_generator(params, space, GeneratorKind.NO_CLICK)
        self.n_a = joint_operators(space).n_a
        init = initial if initial is not None else initial_state(space, params.mbar)
        self.rho = renormalize(init.density())[0]
        self.t = 0.0
        self.log_likelihood = 0.0
        self.flagged = False
        self.clicks = record.photon_times()
        self.index = 0

    def copy(self) -> "LikelihoodTracker":
        dup = copy.copy(self)
        dup.rho = self.rho.copy()
        return dup

    def _propagate(self, rho: np.ndarray, duration: float) -> np.ndarray:
        if duration <= 0:
            return rho
        if self.cache is not None:
            return self.cache.advance(rho, duration, self.control)
        return propagate(self.generator, rho, duration, self.control)

    def _no_click_until(self, target: float) -> None:
        if target <= self.t:
            return
        sigma = self._propagate(self.rho, target - self.t)
        self.rho, tr = renormalize(sigma)
        self.log_likelihood += math.log(tr)
        self.t = target

    def advance_to(self, target: float) -> float:
        if self.flagged:
            return self.log_likelihood
        if target < self.t - 1e-12:
            raise ValueError(f"Tracker is at t={self.t}, cannot rewind to {target}")
        while self.index < len(self.clicks) and self.clicks[self.index] <= target:
            tc = float(self.clicks[self.index])
            self._no_click_until(max(self.t, tc - self.dt_bin))
            crossed = renormalize(self._propagate(self.rho, tc - self.t))[0]
            rate = self.params.kappa_d * float(np.trace(self.n_a @ crossed).real)
            if rate <= 0.0:
                logger.warning(f"Zero emission probability at click t={tc:.4f}; record impossible at this theta")
                self.flagged = True
                self.log_likelihood = -math.inf
                return self.log_likelihood
            self.log_likelihood += math.log(rate * self.dt_bin)
            self.rho = apply_jump(State.mixed(crossed), "photon_detected", self.space).data
            self.t = tc
            self.index += 1
        self._no_click_until(target)
        return self.log_likelihood


def log_likelihood_series(
    record: ClickRecord,
    params: SystemParams,
    space: FockSpace,
    checkpoint_times: Sequence[float],
    initial: Optional[State] = None,
    dt_bin: float = DEFAULT_DT_BIN,
    step_control: StepControl = DEFAULT_CONTROL,
    use_cache: bool = False,
    cache_step: float = DEFAULT_CACHE_STEP,
) -> np.ndarray:
    """log P(record on [0, t]) at each (non-decreasing) checkpoint."""
    cache = PropagatorCache.build(params, space, cache_step, GeneratorKind.NO_CLICK) if use_cache else None
    tracker = LikelihoodTracker(record, params, space, initial, dt_bin, step_control, cache)
    return np.array([tracker.advance_to(float(t)) for t in checkpoint_times])


def log_likelihood(
    record: ClickRecord,
    theta: float,
    template: SystemParams,
    space: FockSpace,
    dt_bin: float = DEFAULT_DT_BIN,
    substitution: ThetaSubstitution = ThetaSubstitution(),
    initial: Optional[State] = None,
    step_control: StepControl = DEFAULT_CONTROL,
    use_cache: bool = False,
) -> float:
    """log P(record | theta); -inf when the record is impossible at theta."""
    params = substitution.apply(template, theta)
    return float(
        log_likelihood_series(record, params, space, [record.t_end], initial, dt_bin, step_control, use_cache)[-1]
    )


# ---------------------------------------------------------------------------
# Posterior
# ---------------------------------------------------------------------------

def _theta_task(args: tuple) -> np.ndarray:
    record, theta, template, substitution, space, initial, dt_bin, times, control, use_cache = args
    params = substitution.apply(template, theta)
    return log_likelihood_series(record, params, space, times, initial, dt_bin, control, use_cache)


def likelihood_matrix(
    record: ClickRecord,
    nodes: np.ndarray,
    template: SystemParams,
    space: FockSpace,
    checkpoint_times: Sequence[float],
    substitution: ThetaSubstitution = ThetaSubstitution(),
    initial: Optional[State] = None,
    dt_bin: float = DEFAULT_DT_BIN,
    step_control: StepControl = DEFAULT_CONTROL,
    pool: Optional[WorkerPool] = None,
    use_cache: bool = False,
) -> np.ndarray:
    """Log-likelihoods, shape (len(checkpoints), len(nodes)), one task per node."""
    pool = pool or WorkerPool(1)
    times = [float(t) for t in checkpoint_times]
    tasks = [
        (record, float(th), template, substitution, space, initial, dt_bin, times, step_control, use_cache)
        for th in nodes
    ]
    columns = pool.map(_theta_task, tasks, label="theta nodes")
    return np.column_stack(columns)


def posterior(
    record: ClickRecord,
    grid: ParameterGrid,
    spec: PriorSpec,
    checkpoint_times: Sequence[float],
    template: SystemParams,
    space: FockSpace,
    substitution: Optional[ThetaSubstitution] = None,
    initial: Optional[State] = None,
    dt_bin: float = DEFAULT_DT_BIN,
    step_control: StepControl = DEFAULT_CONTROL,
    pool: Optional[WorkerPool] = None,
    use_cache: bool = False,
) -> List[ParameterGrid]:
    """Normalised posterior grids at each checkpoint; `grid.log_prior` must be the prior of `spec` on its nodes."""
    nodes = np.asarray(grid.nodes, dtype=float)
    cell = (nodes[-1] - nodes[0]) / max(len(nodes) - 1, 1)
    if nodes[0] > spec.theta_min + 1e-9 * spec.width or nodes[-1] < spec.theta_max - 1e-9 * spec.width:
        raise ValueError(f"Grid [{nodes[0]}, {nodes[-1]}] does not cover prior support [{spec.theta_min}, {spec.theta_max}]")
    if not np.allclose(grid.log_prior, log_prior(nodes, spec), rtol=1e-9, atol=1e-9):
        raise ValueError(f"Grid log prior does not match prior {spec.to_dict()}")
    substitution = substitution or ThetaSubstitution(grid.which_parameter)
    times = sorted(float(t) for t in checkpoint_times)
    # nodes without prior support (e.g. omega_m = 0 at the prior edge) are never evaluated
    live = np.isfinite(grid.log_prior)
    matrix = np.full((len(times), len(nodes)), -np.inf)
    if live.any():
        matrix[:, live] = likelihood_matrix(
            record, nodes[live], template, space, times, substitution, initial, dt_bin, step_control, pool, use_cache
        )
    out: List[ParameterGrid] = []
    for t, row in zip(times, matrix):
        lp = grid.log_prior + row
        try:
            post = normalize_log_posterior(nodes, lp)
        except DegeneratePosteriorError as e:
            raise DegeneratePosteriorError(f"Posterior at t={t} is degenerate: {e}") from e
        out.append(ParameterGrid(grid.which_parameter, nodes, grid.log_prior, row, post, t))
    if out:
        logger.info(
            f"Posterior over {grid.which_parameter} ({len(nodes)} nodes, cell {cell:.3g}): "
            f"mean {out[-1].mean():.4f} at t={times[-1]}"
        )
    return out


def converge_dt_bin(
    record: ClickRecord,
    grid: ParameterGrid,
    spec: PriorSpec,
    checkpoint_times: Sequence[float],
    template: SystemParams,
    space: FockSpace,
    dt_bin: float = DEFAULT_DT_BIN,
    max_halvings: int = 4,
    **kwargs,
) -> Tuple[List[ParameterGrid], float]:
    """Halve dt_bin until the final posterior mean moves by less than 1e-3."""
    current = posterior(record, grid, spec, checkpoint_times, template, space, dt_bin=dt_bin, **kwargs)
    for _ in range(max_halvings):
        finer = posterior(record, grid, spec, checkpoint_times, template, space, dt_bin=dt_bin / 2, **kwargs)
        shift = abs(finer[-1].mean() - current[-1].mean())
        dt_bin /= 2
        current = finer
        if shift < DT_CONVERGENCE_TOL:
            return current, dt_bin
    logger.warning(f"dt_bin refinement stopped at {dt_bin:.2e} before the posterior mean settled")
    return current, dt_bin


# ---------------------------------------------------------------------------
# Estimator and errors
# ---------------------------------------------------------------------------

def estimate_and_mse(posteriors: Sequence[ParameterGrid], truth: Optional[float] = None) -> MseSeries:
    """Posterior mean per checkpoint; squared error against `truth`, else posterior variance."""
    times = np.array([p.time for p in posteriors], dtype=float)
    est = np.array([p.mean() for p in posteriors], dtype=float)
    if truth is None:
        mse = np.array([p.variance() for p in posteriors], dtype=float)
        return MseSeries(times, est, mse, MseMode.POSTERIOR_VARIANCE)
    return MseSeries(times, est, (est - float(truth)) ** 2, MseMode.SQUARED_ERROR)


def average_mse(
    records: Sequence[ClickRecord],
    grid: ParameterGrid,
    spec: PriorSpec,
    truth: Optional[float],
    checkpoint_times: Sequence[float],
    template: SystemParams,
    space: FockSpace,
    **kwargs,
) -> MseSeries:
    """Pointwise mean of per-record MSE series; members kept for dispersion."""
    records = list(records)
    if len(records) < 2:
        raise ValueError(f"average_mse needs at least 2 records, got {len(records)}")
    fps = {r.params_fingerprint for r in records}
    if len(fps) > 1:
        raise RecordMismatchError(f"Records come from different parameters: {sorted(fps)}")
    members = [
        estimate_and_mse(posterior(r, grid, spec, checkpoint_times, template, space, **kwargs), truth)
        for r in records
    ]
    return average_series(members)


def average_series(members: Sequence[MseSeries]) -> MseSeries:
    members = list(members)
    times = members[0].times
    est = np.mean(np.vstack([m.estimate for m in members]), axis=0)
    mse = np.mean(np.vstack([m.mse for m in members]), axis=0)
    return MseSeries(times, est, mse, members[0].mode, members=members)
