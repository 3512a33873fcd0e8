"""
Sensing executors.

infer: generate detector records at the true parameters (per variant),
build the posterior over the chosen parameter at every checkpoint, and
write posterior and MSE series.

bounds: precision bounds along ensemble evolution and/or along one sampled
record, for the full state and the cavity alone.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from core.inference import (
    ThetaSubstitution,
    average_series,
    converge_dt_bin,
    estimate_and_mse,
    make_grid,
    posterior,
)
from core.metrology import bounds_series
from core.orchestrator import ExecutionContext, ProgressCallback
from core.schemas import VariantModel
from core.trajectory import sample_ensemble, sample_trajectory
from models.records import UnravellingMode
from models.results import MseSeries, ParameterGrid
from pipelines.common import apply_variant, checkpoint_grid, setup_from_config

logger = logging.getLogger(__name__)


def _posterior_rows(posts: List[ParameterGrid]) -> List[List[float]]:
    return [[p.time] + [float(x) for x in p.nodes] + [float(w) for w in p.weights] for p in posts]


def _mse_rows(series: MseSeries) -> List[List[float]]:
    spread = series.dispersion()
    rows = []
    for i, t in enumerate(series.times):
        row = [float(t), float(series.estimate[i]), float(series.mse[i])]
        if spread is not None:
            row.append(float(spread[i]))
        rows.append(row)
    return rows


def execute_infer(context: ExecutionContext, progress_callback: Optional[ProgressCallback] = None) -> Dict[str, Any]:
    config = context.config
    block = config.infer
    setup = setup_from_config(config)
    spec = block.prior.to_spec()
    grid = make_grid(block.parameter, spec, block.grid_nodes)
    times = checkpoint_grid(block.t_end, block.checkpoint_every)
    variants = block.variants or [VariantModel(name="base")]
    summary: Dict[str, Any] = {}

    for variant in variants:
        params = apply_variant(setup.params, variant)
        regime = variant.regime if variant.regime is not None else setup.regime
        substitution = ThetaSubstitution(block.parameter, regime if block.couple_detuning else None)
        results = sample_ensemble(
            params, setup.space, setup.initial, block.t_end, block.records,
            mode=UnravellingMode.DETECTOR, master_seed=config.seed, pool=context.pool,
            step_control=setup.control,
        )
        records = [r.record for r in results]
        context.store.write_records(f"records_{variant.name}.jsonl", records)

        members: List[MseSeries] = []
        dt_bin = block.dt_bin
        for i, record in enumerate(records):
            kwargs = dict(
                substitution=substitution, initial=setup.initial, step_control=setup.control,
                pool=context.pool, use_cache=block.use_cache,
            )
            if block.converge_dt:
                posts, dt_bin = converge_dt_bin(record, grid, spec, times, params, setup.space, block.dt_bin, **kwargs)
            else:
                posts = posterior(record, grid, spec, times, params, setup.space, dt_bin=dt_bin, **kwargs)
            header = {
                "prior": spec.to_dict(),
                "grid": {"parameter": block.parameter, "nodes": block.grid_nodes},
                "record": record.fingerprint(),
                "dt_bin": dt_bin,
            }
            suffix = "" if len(records) == 1 else f"_r{i}"
            n = len(grid.nodes)
            context.store.write_csv(
                f"posterior_{variant.name}{suffix}.csv",
                ["t"] + [f"node_{j}" for j in range(n)] + [f"posterior_{j}" for j in range(n)],
                _posterior_rows(posts),
                header=header,
            )
            members.append(estimate_and_mse(posts, block.truth))
            context.event("posterior", f"{variant.name}: record {i} ({record.click_count()} clicks) estimate {posts[-1].mean():.4f}")
            if progress_callback is not None:
                progress_callback("posterior", {
                    "variant": variant.name, "record": i, "records": len(records), "estimate": float(posts[-1].mean()),
                })

        series = members[0] if len(members) == 1 else average_series(members)
        columns = ["t", "estimate", "mse"] + (["mse_spread"] if series.members else [])
        context.store.write_csv(
            f"mse_{variant.name}.csv", columns, _mse_rows(series),
            header={"mode": series.mode.value, "truth": block.truth, "records": len(records)},
        )
        final = posts[-1]
        summary[variant.name] = {
            "params": params.fingerprint(),
            "mean_clicks": float(np.mean([r.click_count() for r in records])),
            "final_estimate": float(series.estimate[-1]),
            "final_mse": float(series.mse[-1]),
        }
        if block.truth is not None and len(records) == 1:
            summary[variant.name]["final_mass_near_truth"] = final.mass_within(block.truth, 0.5)
    return summary


def execute_bounds(context: ExecutionContext, progress_callback: Optional[ProgressCallback] = None) -> Dict[str, Any]:
    config = context.config
    block = config.bounds
    setup = setup_from_config(config)
    times = checkpoint_grid(block.t_end, block.checkpoint_every)
    prior = block.prior.to_spec() if block.prior else None

    sources = {"ensemble": [None], "conditional": ["record"], "both": [None, "record"]}[block.source]
    record = None
    if "record" in sources:
        record, _ = sample_trajectory(
            setup.params, setup.space, setup.initial, block.t_end,
            mode=UnravellingMode.DETECTOR, seed=config.seed, step_control=setup.control,
        )
        context.store.write_records("record.jsonl", [record])
    reductions = [False, True] if block.reduce_to_cavity else [False]

    rows: List[List[Any]] = []
    summary: Dict[str, Any] = {}
    for kind in block.kinds:
        for src in sources:
            for reduce in reductions:
                series = bounds_series(
                    kind, setup.params, block.parameter, times, setup.space,
                    theta=block.theta, prior=prior,
                    record=record if src else None,
                    reduce_to_cavity=reduce,
                    initial=setup.initial,
                    delta_theta=block.delta_theta,
                    repetitions=block.repetitions,
                    grid_nodes=block.grid_nodes,
                    step_control=setup.control,
                    pool=context.pool,
                )
                rows.extend([float(t), float(v), series.kind.value, series.source] for t, v in zip(series.times, series.value))
                summary[f"{series.kind.value}:{series.source}"] = float(series.value[-1])
                context.event("bound", f"{series.kind.value} from {series.source}: final {series.value[-1]:.4g}")
                if progress_callback is not None:
                    progress_callback("bound", {"kind": series.kind.value, "source": series.source, "final": float(series.value[-1])})

    context.store.write_csv(
        "bounds.csv", ["t", "value", "kind", "source"], rows,
        header={"params": setup.params.fingerprint(), "parameter": block.parameter,
                "record": record.fingerprint() if record else None},
    )
    if record is not None:
        summary["clicks"] = record.click_count()
    return summary
