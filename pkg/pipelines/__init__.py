"""
Experiment executors, one per experiment kind.
"""

from typing import Callable, Dict, Optional

from core.jobs import RunRecord
from core.orchestrator import ExperimentRunner, ProgressCallback
from core.schemas import ExperimentConfig
from pipelines.correlations import execute_g2, execute_zeta
from pipelines.entanglement import execute_entanglement
from pipelines.sensing import execute_bounds, execute_infer
from pipelines.simulate import execute_simulate

PIPELINE_EXECUTORS: Dict[str, Callable] = {
    "simulate": execute_simulate,
    "entanglement": execute_entanglement,
    "g2": execute_g2,
    "zeta": execute_zeta,
    "infer": execute_infer,
    "bounds": execute_bounds,
}


def build_runner(workers: Optional[int] = None) -> ExperimentRunner:
    runner = ExperimentRunner(workers=workers)
    for kind, executor in PIPELINE_EXECUTORS.items():
        runner.register_executor(kind, executor)
    return runner


def run_experiment(
    config: ExperimentConfig,
    out_dir: Optional[str] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> RunRecord:
    """Run one validated config with every executor registered; errors propagate after the run record is written."""
    return build_runner().run(config, out_dir=out_dir, progress_callback=progress_callback)
