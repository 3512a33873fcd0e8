"""
Entanglement executors.

closed: linear entropy of the cavity along unitary evolution (with the
closed-form purity alongside) and along no-click evolution with cavity
jumps at fixed rescaled times.

open: negativity along the conditional state of one sampled detector
record, next to the ensemble negativity.
"""

import logging
from typing import Any, Dict

import numpy as np

from core.closed import analytic_purity, closed_entropy_series, rescaled_rates
from core.master import propagate_master
from core.orchestrator import ExecutionContext
from core.schemas import as_complex
from core.statistics import negativity, negativity_series
from core.trajectory import sample_trajectory
from models.records import UnravellingMode
from pipelines.common import checkpoint_grid, setup_from_config

logger = logging.getLogger(__name__)


def _closed(context: ExecutionContext) -> Dict[str, Any]:
    config = context.config
    block = config.entanglement
    setup = setup_from_config(config)
    alpha, beta = as_complex(block.alpha), as_complex(block.beta)
    times = np.linspace(0.0, block.t_prime_end, block.points)

    k, r = rescaled_rates(setup.params, no_click=False)
    unitary = closed_entropy_series(alpha, beta, k, r, times, setup.space)
    analytic = np.array([1.0 - analytic_purity(alpha, beta, k, r, t) for t in times])

    k_c, r_c = rescaled_rates(setup.params, no_click=block.no_click)
    conditional = closed_entropy_series(alpha, beta, k_c, r_c, times, setup.space, block.jump_times)
    first_jump = min(block.jump_times) if block.jump_times else np.inf
    analytic_cond = np.array(
        [1.0 - analytic_purity(alpha, beta, k_c, r_c, t) if t < first_jump else np.nan for t in times]
    )

    rows = [
        [float(t), float(unitary.entropy[i]), float(analytic[i]), float(conditional.entropy[i]),
         float(analytic_cond[i]), float(conditional.norm[i])]
        for i, t in enumerate(times)
    ]
    context.store.write_csv(
        "entropy.csv",
        ["t_prime", "entropy_closed", "entropy_closed_analytic", "entropy_conditional",
         "entropy_conditional_analytic", "no_click_probability"],
        rows,
        header={"k": k, "r": [r.real, r.imag], "jump_times": list(block.jump_times), "no_click": block.no_click},
    )
    deviation = float(np.max(np.abs(unitary.entropy - analytic)))
    context.event("entropy", f"Closed entropy over {len(times)} points, max deviation from closed form {deviation:.2e}")
    return {"dynamics": "closed", "points": len(times), "max_analytic_deviation": deviation}


def _open(context: ExecutionContext) -> Dict[str, Any]:
    config = context.config
    block = config.entanglement
    setup = setup_from_config(config)
    record, _ = sample_trajectory(
        setup.params, setup.space, setup.initial, block.t_end,
        mode=UnravellingMode.DETECTOR, seed=config.seed, stream=0, step_control=setup.control,
    )
    context.store.write_records("record.jsonl", [record])
    times = checkpoint_grid(block.t_end, block.sample_dt)

    series = negativity_series(record, setup.params, setup.space, setup.initial, times, block.click_offset, setup.control)
    ensemble = propagate_master(setup.initial, times, setup.params, setup.space, setup.control)
    ensemble_neg = np.array([negativity(s, setup.space) for s in ensemble])

    header = {"params": setup.params.fingerprint(), "record": record.fingerprint()}
    context.store.write_csv(
        "negativity.csv",
        ["t", "conditional", "conditional_raw", "ensemble"],
        [[float(t), float(series.negativity[i]), float(series.raw[i]), float(ensemble_neg[i])] for i, t in enumerate(times)],
        header=header,
    )
    context.store.write_csv(
        "clicks.csv",
        ["t_click", "before", "after"],
        [[c, float(series.before_click[i]), float(series.after_click[i])] for i, c in enumerate(series.click_times)],
        header=header,
    )
    boosted = int(np.sum(series.after_click > series.before_click)) if series.click_times else 0
    context.event("negativity", f"{len(series.click_times)} clicks, negativity rose at {boosted}")
    return {
        "dynamics": "open",
        "clicks": len(series.click_times),
        "clicks_raising_negativity": boosted,
        "final_ensemble_negativity": float(ensemble_neg[-1]),
    }


def execute_entanglement(context: ExecutionContext) -> Dict[str, Any]:
    if context.config.entanglement.dynamics == "closed":
        return _closed(context)
    return _open(context)
