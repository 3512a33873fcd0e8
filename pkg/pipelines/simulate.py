"""
Trajectory sampling executor.

Samples an ensemble of click records and writes them together with the
trajectory-averaged occupations at evenly spaced checkpoints, next to the
ensemble (master-equation) occupations at the same times.
"""

from typing import Any, Dict

import numpy as np

from core.hamiltonians import joint_operators
from core.master import propagate_master
from core.orchestrator import ExecutionContext
from core.trajectory import RNG_ALGORITHM, sample_ensemble
from models.records import UnravellingMode
from pipelines.common import setup_from_config


def execute_simulate(context: ExecutionContext) -> Dict[str, Any]:
    config = context.config
    block = config.simulate
    setup = setup_from_config(config)
    ops = joint_operators(setup.space)
    checkpoints = np.linspace(0.0, block.t_end, block.checkpoints + 1) if block.checkpoints else np.array([])

    results = sample_ensemble(
        setup.params,
        setup.space,
        setup.initial,
        block.t_end,
        block.trajectories,
        mode=UnravellingMode(block.mode),
        master_seed=config.seed,
        pool=context.pool,
        step_control=setup.control,
        checkpoints=checkpoints,
    )
    records = [r.record for r in results]
    context.store.write_records("records.jsonl", records)
    clicks = [r.click_count() for r in records]
    context.event("trajectories", f"Sampled {len(records)} records, mean {np.mean(clicks):.1f} clicks")

    if len(checkpoints):
        n_a = np.array([[s.expect(ops.n_a).real for s in r.snapshots] for r in results])
        n_b = np.array([[s.expect(ops.n_b).real for s in r.snapshots] for r in results])
        sem = np.std(n_a, axis=0, ddof=1) / np.sqrt(len(results)) if len(results) > 1 else np.zeros(len(checkpoints))
        ensemble = propagate_master(setup.initial, checkpoints, setup.params, setup.space, setup.control)
        rows = [
            [
                float(t),
                float(n_a[:, i].mean()),
                float(sem[i]),
                float(n_b[:, i].mean()),
                float(ensemble[i].expect(ops.n_a).real),
                float(ensemble[i].expect(ops.n_b).real),
            ]
            for i, t in enumerate(checkpoints)
        ]
        context.store.write_csv(
            "occupations.csv",
            ["t", "n_cavity_traj", "n_cavity_sem", "n_mech_traj", "n_cavity_ensemble", "n_mech_ensemble"],
            rows,
            header={"params": setup.params.fingerprint(), "trajectories": len(results), "mode": block.mode},
        )

    return {
        "trajectories": len(records),
        "mean_clicks": float(np.mean(clicks)),
        "clicks": clicks,
        "fingerprint": setup.params.fingerprint(),
        "rng": RNG_ALGORITHM,
    }
