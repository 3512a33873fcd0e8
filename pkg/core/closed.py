"""
Closed and no-click evolution of the undriven system (Omega = 0).

With t' = omega_m t, k = g/omega_m and r = -Delta/omega_m the evolution operator
factorises per cavity Fock level n:

    U(t') = e^{-i r n t'} e^{i k^2 n^2 (t' - sin t')} e^{-k n (eta b^dag - eta^* b)} e^{-i b^dag b t'},
    eta = 1 - e^{-i t'}.

A complex r~ = -(Delta + i kappa_d/2)/omega_m gives the unnormalised no-click
state whose norm^2 is the probability of seeing no photon. The displacement
sign follows the +g coupling of H_RF; purities do not depend on it.
"""

from __future__ import annotations

import logging
import math
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from core.errors import ConvergenceError, InvalidStateError, ZeroNormError
from core.fock import coherent_state, displacement_operator, partial_trace, product_state
from models.params import SystemParams
from models.results import EntropySeries
from models.space import FockSpace, Mode, State, check_space

logger = logging.getLogger(__name__)

SERIES_TAIL_TOL = 1e-10
ZERO_NORM = 1e-14


def rescaled_rates(params: SystemParams, no_click: bool = True) -> tuple:
    """(k, r) for the closed form; r is complex when no_click and kappa_d > 0."""
    k = params.g / params.omega_m
    if no_click:
        r = -(params.delta + 0.5j * params.kappa_d) / params.omega_m
    else:
        r = -params.delta / params.omega_m
    return k, complex(r)


def evolve_closed(initial: State, t_prime: float, k: float, r: complex, space: FockSpace) -> State:
    """Apply U(t') blockwise: one mechanical displacement per cavity level."""
    if not initial.is_pure:
        raise InvalidStateError("evolve_closed requires a pure state vector")
    check_space(initial, space)
    r = complex(r)
    psi = initial.data.reshape(space.dim_cavity, space.dim_mech)
    eta = 1.0 - np.exp(-1j * t_prime)
    rotation = np.exp(-1j * np.arange(space.dim_mech) * t_prime)
    out = np.empty_like(psi)
    for n in range(space.dim_cavity):
        block = rotation * psi[n]
        if k != 0 and n > 0:
            block = displacement_operator(-k * n * eta, space.dim_mech).matrix @ block
        phase = np.exp(-1j * r * n * t_prime + 1j * k ** 2 * n ** 2 * (t_prime - math.sin(t_prime)))
        out[n] = phase * block
    normalized = initial.normalized and r.imag == 0
    return State.pure(out.reshape(-1), normalized=normalized, truncated=initial.truncated)


def apply_cavity_jump_pure(state: State, space: FockSpace) -> State:
    """|psi> -> a|psi> / ||a|psi>||."""
    if not state.is_pure:
        raise InvalidStateError("apply_cavity_jump_pure requires a pure state vector")
    check_space(state, space)
    psi = state.data.reshape(space.dim_cavity, space.dim_mech)
    out = np.zeros_like(psi)
    out[:-1] = np.sqrt(np.arange(1, space.dim_cavity))[:, None] * psi[1:]
    norm = float(np.linalg.norm(out))
    if norm < ZERO_NORM:
        raise ZeroNormError("Cavity jump impossible: state has no population above the vacuum")
    return State.pure(out.reshape(-1) / norm, truncated=state.truncated)


def linear_entropy(state: State, space: FockSpace) -> float:
    """1 - Tr(rho_cav^2) of the normalised reduced cavity state."""
    reduced = partial_trace(state, Mode.CAVITY, space).data
    tr = float(np.trace(reduced).real)
    if tr <= 0:
        raise InvalidStateError(f"Cannot take linear entropy of a state with trace {tr}")
    rho = reduced / tr
    return float(1.0 - np.sum(np.abs(rho) ** 2))


def _default_series_cutoff(alpha_tilde_abs: float) -> int:
    return max(20, int(math.ceil(alpha_tilde_abs ** 2 + 8 * alpha_tilde_abs)))


def analytic_purity(
    alpha: complex,
    beta: complex,
    k: float,
    r_tilde: complex,
    t_prime: float,
    series_cutoff: Optional[int] = None,
) -> float:
    """
    Closed-form cavity purity for an initial coherent product |alpha>|beta>.

    Double sum over photon numbers n, n' with Poisson weights of |alpha~|^2,
    alpha~ = alpha e^{-i r~ t'}, and mechanical coherent amplitudes
    phi_n = beta e^{-i t'} - k n eta.
    """
    alpha_t = complex(alpha) * np.exp(-1j * complex(r_tilde) * t_prime)
    mu = abs(alpha_t) ** 2
    cutoff = series_cutoff if series_cutoff is not None else _default_series_cutoff(abs(alpha_t))
    tail = float(poisson.sf(cutoff - 1, mu)) if mu > 0 else 0.0
    if tail > SERIES_TAIL_TOL:
        raise ConvergenceError(
            f"Series cutoff {cutoff} leaves Poisson tail {tail:.2e} > {SERIES_TAIL_TOL} for |alpha~|^2={mu:.3f}"
        )
    n = np.arange(cutoff)
    eta = 1.0 - np.exp(-1j * t_prime)
    phi = complex(beta) * np.exp(-1j * t_prime) - k * n * eta
    if mu > 0:
        log_w = -mu + n * math.log(mu) - gammaln(n + 1)
    else:
        log_w = np.where(n == 0, 0.0, -np.inf)
    abs2 = np.abs(phi) ** 2
    cross = 2.0 * np.real(np.outer(phi, phi.conj()))
    log_terms = log_w[:, None] + log_w[None, :] - abs2[:, None] - abs2[None, :] + cross
    total = float(np.exp(log_terms).sum())
    norm = float(np.exp(log_w).sum())
    return total / norm ** 2


def closed_entropy_series(
    alpha: complex,
    beta: complex,
    k: float,
    r: complex,
    times: Sequence[float],
    space: FockSpace,
    jump_times: Iterable[float] = (),
) -> EntropySeries:
    """
    Linear entropy along closed evolution from |alpha>|beta>, with cavity
    jumps applied at the given rescaled times.
    """
    times = np.asarray(sorted(times), dtype=float)
    jumps = sorted(float(t) for t in jump_times)
    origin = product_state(coherent_state(alpha, space.dim_cavity), coherent_state(beta, space.dim_mech))
    origin_t = 0.0
    weight = 1.0  # no-click probability accumulated before the current origin
    entropy = np.empty(len(times))
    norms = np.empty(len(times))
    pending = list(jumps)
    for i, t in enumerate(times):
        while pending and pending[0] <= t:
            tj = pending.pop(0)
            before = evolve_closed(origin, tj - origin_t, k, r, space)
            weight *= before.trace()
            origin = apply_cavity_jump_pure(before, space)
            origin_t = tj
            logger.debug(f"Cavity jump at t'={tj:.4f}, entropy reset from new origin")
        current = evolve_closed(origin, t - origin_t, k, r, space)
        entropy[i] = linear_entropy(current, space)
        norms[i] = weight * current.trace()
    return EntropySeries(times=times, entropy=entropy, norm=norms, jump_times=tuple(jumps))
