"""
Precision bounds for single-parameter sensing.

Fidelity and Bures distance between densities, the quantum Fisher
information as the small-shift limit of the Bures distance,

    F_Q[rho_theta] = lim 8 (1 - sqrt f(rho_{theta - d/2}, rho_{theta + d/2})) / d^2,

the Fisher information of a prior density, and the Cramer-Rao / van Trees
bounds (classical and quantum) along ensemble or conditional evolution.
Classical bounds use the photon/phonon number measurement: its Fisher
information equals the fidelity-based information of the dephased state.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import svdvals

from core.errors import AccuracyError, ConvergenceError, InvalidStateError
from core.fock import initial_state, partial_trace
from core.inference import ThetaSubstitution, make_grid, prior_density
from core.integrators import DEFAULT_CONTROL, StepControl
from core.jobs import WorkerPool
from core.master import propagate_master
from core.trajectory import replay_conditional
from models.params import SystemParams
from models.records import ClickRecord
from models.results import BoundKind, BoundSeries, PriorSpec
from models.space import FockSpace, Mode, State

logger = logging.getLogger(__name__)

CLAMP_TOLERANCE = 1e-8
TRACE_TOLERANCE = 1e-6
HERMITICITY_TOLERANCE = 1e-8
QFI_FLOOR = 1e-8
QFI_RTOL = 0.01
DEFAULT_DELTA_THETA = 1e-3
MAX_REFINEMENTS = 4

StatesAt = Callable[[float], List[State]]


# ---------------------------------------------------------------------------
# Fidelity
# ---------------------------------------------------------------------------

def _checked_density(state: State, what: str) -> np.ndarray:
    rho = state.density()
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITICITY_TOLERANCE:
        raise InvalidStateError(f"{what} is not Hermitian within {HERMITICITY_TOLERANCE:.0e}")
    tr = float(np.trace(rho).real)
    if abs(tr - 1.0) > TRACE_TOLERANCE:
        raise InvalidStateError(f"{what} has trace {tr:.8f}, expected 1 within {TRACE_TOLERANCE:.0e}")
    return 0.5 * (rho + rho.conj().T)


def _clamped_eigh(rho: np.ndarray, what: str):
    lam, vecs = np.linalg.eigh(rho)
    negative = float(-lam[lam < 0].sum())
    if negative > CLAMP_TOLERANCE:
        raise AccuracyError(
            f"Clamping {what} eigenvalues removes {negative:.2e} of trace",
            diagnostics={"clamped_mass": negative, "min_eigenvalue": float(lam[0])},
        )
    return np.clip(lam, 0.0, None), vecs


def _psd_sqrt(rho: np.ndarray, what: str) -> np.ndarray:
    lam, vecs = _clamped_eigh(rho, what)
    return (vecs * np.sqrt(lam)) @ vecs.conj().T


def fidelity(rho1: State, rho2: State) -> float:
    """
    (|| sqrt(rho1) sqrt(rho2) ||_1)^2, the trace norm taken as a sum of
    singular values. Square roots come from eigendecompositions clamped at
    zero; pure inputs take the overlap shortcut.
    """
    if rho1.dim != rho2.dim:
        raise InvalidStateError(f"Cannot compare states of dimension {rho1.dim} and {rho2.dim}")
    if rho1.is_pure and rho2.is_pure:
        psi = rho1.data / np.linalg.norm(rho1.data)
        phi = rho2.data / np.linalg.norm(rho2.data)
        return float(abs(np.vdot(psi, phi)) ** 2)
    if rho1.is_pure or rho2.is_pure:
        vec, other = (rho1, rho2) if rho1.is_pure else (rho2, rho1)
        psi = vec.data / np.linalg.norm(vec.data)
        sigma = _checked_density(other, "state")
        return float(np.vdot(psi, sigma @ psi).real)

    # singular values of the product avoid square roots of noisy near-zero eigenvalues
    a = _psd_sqrt(_checked_density(rho1, "rho1"), "rho1")
    b = _psd_sqrt(_checked_density(rho2, "rho2"), "rho2")
    return float(svdvals(a @ b).sum() ** 2)


def bures_distance(rho1: State, rho2: State) -> float:
    f = min(fidelity(rho1, rho2), 1.0)
    return math.sqrt(max(0.0, 2.0 * (1.0 - math.sqrt(f))))


# ---------------------------------------------------------------------------
# Quantum Fisher information
# ---------------------------------------------------------------------------

def _bures_information(lo: State, hi: State, delta: float) -> float:
    f = min(fidelity(lo, hi), 1.0)
    return 8.0 * (1.0 - math.sqrt(f)) / delta ** 2


def qfi_series(
    theta: float,
    delta_theta: float,
    states_at: StatesAt,
    rtol: float = QFI_RTOL,
    max_refinements: int = MAX_REFINEMENTS,
) -> np.ndarray:
    """
    Finite-difference QFI at every entry of `states_at(theta)`.

    Each entry is accepted once the estimates at d and d/2 agree within
    `rtol` (or both fall under QFI_FLOOR, which reports 0); entries that never
    settle raise AccuracyError with the estimate history.
    """
    if delta_theta <= 0:
        raise ValueError(f"delta_theta must be positive, got {delta_theta}")

    def estimate(delta: float) -> np.ndarray:
        lo = states_at(theta - 0.5 * delta)
        hi = states_at(theta + 0.5 * delta)
        return np.array([_bures_information(a, b, delta) for a, b in zip(lo, hi)])

    delta = float(delta_theta)
    coarse = estimate(delta)
    history: Dict[float, List[float]] = {delta: coarse.tolist()}
    result = np.full(len(coarse), np.nan)
    pending = np.ones(len(coarse), dtype=bool)
    for _ in range(max_refinements):
        delta *= 0.5
        fine = estimate(delta)
        history[delta] = fine.tolist()
        tiny = (np.abs(coarse) < QFI_FLOOR) & (np.abs(fine) < QFI_FLOOR)
        agree = tiny | (np.abs(fine - coarse) <= rtol * np.abs(fine))
        settled = pending & agree
        result[settled] = np.where(tiny[settled], 0.0, fine[settled])
        pending &= ~agree
        if not pending.any():
            return result
        coarse = fine
    raise AccuracyError(
        f"QFI at theta={theta} did not settle after {max_refinements} halvings of delta_theta",
        diagnostics={"theta": theta, "unsettled": np.flatnonzero(pending).tolist(), "estimates": history},
    )


def qfi_finite_difference(
    theta: float,
    delta_theta: float,
    state_at: Callable[[float], State],
    rtol: float = QFI_RTOL,
    max_refinements: int = MAX_REFINEMENTS,
) -> float:
    """8 (1 - sqrt f(rho_{theta-d/2}, rho_{theta+d/2})) / d^2 with d-halving refinement."""
    return float(qfi_series(theta, delta_theta, lambda th: [state_at(th)], rtol, max_refinements)[0])


def dephase(state: State) -> State:
    """Number-basis diagonal of the state: the outcome distribution of a Fock measurement."""
    if state.is_pure:
        p = np.abs(state.data) ** 2
    else:
        p = np.real(np.diag(state.data))
    p = np.clip(p, 0.0, None)
    return State.mixed(np.diag(p / p.sum()).astype(complex))


# ---------------------------------------------------------------------------
# Prior information
# ---------------------------------------------------------------------------

def _density_information(density: Callable[[np.ndarray], np.ndarray], lo: float, hi: float, nodes: int, cutoff: float) -> float:
    xs = np.linspace(lo, hi, nodes)
    p = np.asarray(density(xs), dtype=float)
    keep = p > cutoff * float(np.max(p))
    integrand = np.zeros_like(xs)
    # central differences only where both neighbours are kept; endpoint cells drop out
    interior = np.zeros_like(keep)
    interior[1:-1] = keep[1:-1] & keep[:-2] & keep[2:]
    idx = np.flatnonzero(interior)
    if idx.size:
        logp = np.log(np.where(keep, p, 1.0))
        dlog = (logp[idx + 1] - logp[idx - 1]) / (xs[idx + 1] - xs[idx - 1])
        integrand[idx] = p[idx] * dlog ** 2
    return float(trapezoid(integrand, xs))


def fisher_information_of_density(
    density: Callable[[np.ndarray], np.ndarray],
    theta_range: Sequence[float],
    quadrature_nodes: int = 801,
    cutoff: float = 1e-12,
    rtol: float = QFI_RTOL,
    max_doublings: int = 6,
) -> float:
    """
    F[P] = int P (d ln P / d theta)^2 d theta by trapezoid quadrature.

    Nodes where P < cutoff * max P are excluded together with their
    neighbours' derivative stencils. The node count is doubled until two
    successive values agree within `rtol`; ConvergenceError otherwise.
    """
    lo, hi = float(theta_range[0]), float(theta_range[1])
    if not hi > lo:
        raise ValueError(f"theta_range must be increasing, got {theta_range}")
    n = int(quadrature_nodes)
    previous = _density_information(density, lo, hi, n, cutoff)
    values = [previous]
    for _ in range(max_doublings):
        n = 2 * n - 1
        current = _density_information(density, lo, hi, n, cutoff)
        values.append(current)
        if abs(current - previous) <= rtol * abs(current):
            return current
        previous = current
    raise ConvergenceError(f"Fisher information of the density kept changing under node doubling: {values}")


def prior_information(spec: PriorSpec, quadrature_nodes: int = 801) -> float:
    return fisher_information_of_density(
        lambda xs: prior_density(xs, spec), (spec.theta_min, spec.theta_max), quadrature_nodes
    )


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------

def _states_factory(
    template: SystemParams,
    substitution: ThetaSubstitution,
    space: FockSpace,
    initial: State,
    times: Sequence[float],
    record: Optional[ClickRecord],
    reduce_to_cavity: bool,
    classical: bool,
    control: StepControl,
) -> StatesAt:
    def states_at(theta: float) -> List[State]:
        params = substitution.apply(template, theta)
        if record is None:
            states = propagate_master(initial, times, params, space, control)
        else:
            states = replay_conditional(record, params, space, initial, times, control, strict=False)
        if reduce_to_cavity:
            states = [partial_trace(s, Mode.CAVITY, space) for s in states]
        if classical:
            states = [dephase(s) for s in states]
        return states

    return states_at


def _information_task(args: tuple) -> np.ndarray:
    (theta, delta_theta, template, substitution, space, initial, times, record, reduce, classical, control) = args
    states_at = _states_factory(template, substitution, space, initial, times, record, reduce, classical, control)
    return qfi_series(theta, delta_theta, states_at)


def bounds_series(
    kind: Union[BoundKind, str],
    template: SystemParams,
    which_parameter: str,
    checkpoint_times: Sequence[float],
    space: FockSpace,
    theta: Optional[float] = None,
    prior: Optional[PriorSpec] = None,
    record: Optional[ClickRecord] = None,
    reduce_to_cavity: bool = False,
    initial: Optional[State] = None,
    delta_theta: float = DEFAULT_DELTA_THETA,
    repetitions: int = 1,
    grid_nodes: int = 81,
    substitution: Optional[ThetaSubstitution] = None,
    step_control: StepControl = DEFAULT_CONTROL,
    pool: Optional[WorkerPool] = None,
) -> BoundSeries:
    """
    Bound on the (average) MSE at each checkpoint.

    Args:
        kind: CRB / QCRB at a point theta, VanTrees / QVanTrees over a prior
        record: replay this record (conditional states); ensemble evolution when None
        reduce_to_cavity: trace out the mechanics before computing information
        repetitions: nu independent repetitions; every bound is divided by nu

    Returns:
        BoundSeries; entries with zero information carry +inf
    """
    kind = BoundKind(kind)
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    times = [float(t) for t in checkpoint_times]
    substitution = substitution or ThetaSubstitution(which_parameter)
    initial = initial if initial is not None else initial_state(space, template.mbar)
    classical = not kind.is_quantum
    pool = pool or WorkerPool(1)

    def task(th: float) -> tuple:
        return (th, delta_theta, template, substitution, space, initial, times, record,
                reduce_to_cavity, classical, step_control)

    if kind.is_bayesian:
        if prior is None:
            raise ValueError(f"{kind.value} needs a prior")
        grid = make_grid(which_parameter, prior, grid_nodes)
        p = prior_density(grid.nodes, prior)
        live = np.flatnonzero(p > 0)
        rows = pool.map(_information_task, [task(float(grid.nodes[i])) for i in live], label="bound grid nodes")
        per_node = np.zeros((len(grid.nodes), len(times)))
        for i, row in zip(live, rows):
            per_node[i] = row
        averaged = trapezoid(p[:, None] * per_node, grid.nodes, axis=0)
        information = prior_information(prior) + averaged
    else:
        point = float(theta) if theta is not None else float(getattr(template, which_parameter))
        information = pool.map(_information_task, [task(point)], label="bound points")[0]

    information = np.asarray(information, dtype=float)
    with np.errstate(divide="ignore"):
        value = np.where(information > 0, 1.0 / np.where(information > 0, information, 1.0), np.inf)
    value = value / repetitions

    source = "ensemble" if record is None else f"conditional:{record.fingerprint()}"
    if reduce_to_cavity:
        source += "+reduced-cavity"
    logger.info(f"{kind.value} over {len(times)} checkpoints from {source}: final {value[-1]:.4g}")
    return BoundSeries(np.asarray(times), value, kind, source, information)
