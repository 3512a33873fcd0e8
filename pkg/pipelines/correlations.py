"""
Photon-correlation executors: g2 grids per detuning regime and the
next-emission (zeta) maps from sampled records.
"""

import logging
from typing import Any, Dict, List, Optional

import numpy as np

from core.orchestrator import ExecutionContext
from core.statistics import band_mean, g2_grid, zeta_difference, zeta_histogram
from core.trajectory import sample_ensemble
from models.records import UnravellingMode
from models.results import ZetaMap
from pipelines.common import params_for_regime, regime_label, setup_from_config

logger = logging.getLogger(__name__)


def _regimes(requested: List[int], configured: Optional[int]) -> List[Optional[int]]:
    if requested:
        return list(requested)
    return [configured]


def execute_g2(context: ExecutionContext) -> Dict[str, Any]:
    config = context.config
    block = config.g2
    setup = setup_from_config(config)
    summary: Dict[str, Any] = {}
    for regime in _regimes(block.regimes, setup.regime):
        params = setup.params
        if regime is not None:
            params = params_for_regime(params, regime, block.regime_coupling)
        grid = g2_grid(block.t1_values, block.dt_values, params, setup.space, setup.initial, setup.control, context.pool)
        label = regime_label(regime)
        context.store.write_csv(
            f"g2_{label}.csv",
            ["t1", "dt", "g2"],
            grid.to_rows(),
            header={"params": params.fingerprint(), "delta": params.delta, "g": params.g},
        )
        zero = [float(v) for v in grid.values[:, block.dt_values.index(0.0)]] if 0.0 in block.dt_values else []
        summary[label] = {"delta": params.delta, "g2_zero": zero}
        context.event("g2", f"g2 grid {grid.values.shape} for {label}")
    return summary


def _zeta_rows(zmap: ZetaMap) -> List[List[float]]:
    rows = []
    for i, t1 in enumerate(zmap.t1_centers):
        for j, t2 in enumerate(zmap.t2_centers):
            rows.append([float(t1), float(t2), float(zmap.values[i, j])])
    return rows


def execute_zeta(context: ExecutionContext) -> Dict[str, Any]:
    config = context.config
    block = config.zeta
    setup = setup_from_config(config)
    second_axis = "dt" if block.relative else "t2"
    maps: List[ZetaMap] = []
    summary: Dict[str, Any] = {}
    for regime in _regimes(block.regimes, setup.regime):
        params = setup.params if regime is None else params_for_regime(setup.params, regime)
        label = regime_label(regime)
        results = sample_ensemble(
            params, setup.space, setup.initial, block.t_end, block.trajectories,
            mode=UnravellingMode.DETECTOR, master_seed=config.seed, pool=context.pool,
            step_control=setup.control,
        )
        records = [r.record for r in results]
        context.store.write_records(f"records_{label}.jsonl", records)
        zmap = zeta_histogram(records, block.bins, block.bins, relative=block.relative, dt_max=block.dt_max)
        context.store.write_csv(
            f"zeta_{label}.csv", ["t1", second_axis, "zeta"], _zeta_rows(zmap),
            header={"params": zmap.fingerprint, "pairs": zmap.pair_count},
        )
        maps.append(zmap)
        summary[label] = {
            "pairs": zmap.pair_count,
            "mean_clicks": float(np.mean([r.click_count() for r in records])),
        }
        context.event("zeta", f"zeta map for {label} from {zmap.pair_count} photon pairs")

    if len(maps) == 2 and block.relative:
        diff = zeta_difference(maps[0], maps[1])
        context.store.write_csv("zeta_difference.csv", ["t1", "dt", "difference"], _zeta_rows(diff))
        summary["difference"] = {
            "short_band_mean": band_mean(diff, 0.0, 2.0),
            "long_band_mean": band_mean(diff, 2.0, 10.0),
        }
    return summary
