"""
Experiment runner.

Central controller that resolves an experiment kind to its executor, gives
it an artifact store and a worker pool, and keeps the run's bookkeeping
(status, events, artifacts) in a RunRecord written next to the manifest.
"""

import inspect
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Dict, Optional

from core.errors import AccuracyError, TruncationError
from core.jobs import JobStatus, RunRecord, WorkerPool
from core.schemas import ExperimentConfig
from core.storage import ArtifactStore, default_output_dir

logger = logging.getLogger(__name__)

Executor = Callable[..., Dict[str, Any]]
ProgressCallback = Callable[[str, Dict[str, Any]], None]


@dataclass
class ExecutionContext:
    """Context passed to experiment executors."""
    config: ExperimentConfig
    store: ArtifactStore
    pool: WorkerPool
    run: RunRecord

    def event(self, kind: str, message: str, **extra: Any) -> None:
        self.run.append_event(kind, message, **extra)
        logger.info(message)


def run_label(config: ExperimentConfig) -> str:
    """Output directory name; a function of the config only, so reruns overwrite."""
    return f"{config.preset or config.kind}-seed{config.seed}"


class ExperimentRunner:
    """
    Runs one experiment config end to end.

    Executors are registered per experiment kind and return a summary dict
    (stored in the run record's progress). Artifacts they write through the
    store end up in manifest.json.
    """

    def __init__(self, workers: Optional[int] = None):
        self.workers = workers
        self.executors: Dict[str, Executor] = {}

    def register_executor(self, kind: str, executor: Executor) -> None:
        """Register a custom executor for an experiment kind."""
        self.executors[kind] = executor

    def output_dir(self, config: ExperimentConfig, out_dir: Optional[str] = None) -> str:
        if out_dir:
            return out_dir
        if config.out_dir:
            return config.out_dir
        return os.path.join(default_output_dir(), run_label(config))

    def run(
        self,
        config: ExperimentConfig,
        out_dir: Optional[str] = None,
        progress_callback: Optional[ProgressCallback] = None,
    ) -> RunRecord:
        """
        Execute the config's experiment.

        Returns:
            The finished RunRecord. Executor exceptions are recorded on the
            run (status failed, or aborted for truncation/accuracy guards)
            and then re-raised.
        """
        executor = self.executors.get(config.kind)
        if executor is None:
            raise ValueError(f"No executor registered for experiment kind '{config.kind}'")

        store = ArtifactStore(self.output_dir(config, out_dir))
        workers = self.workers if self.workers is not None else config.workers
        run = RunRecord(kind=config.kind, preset=config.preset)
        context = ExecutionContext(config=config, store=store, pool=WorkerPool(workers), run=run)

        run.status = JobStatus.running
        run.started_at = datetime.now(timezone.utc).isoformat()
        context.event("start", f"Running {config.kind} ({config.preset or 'custom'}) into {store.base_dir}")

        try:
            try:
                supports_cb = "progress_callback" in inspect.signature(executor).parameters
            except (ValueError, TypeError):
                supports_cb = False
            if supports_cb and progress_callback is not None:
                summary = executor(context, progress_callback=progress_callback)
            else:
                summary = executor(context)
            store.write_manifest(config.model_dump(mode="json"))
            run.progress = summary or {}
            run.status = JobStatus.succeeded
            context.event("finish", f"{config.kind} finished with {len(store.artifacts)} artifacts")
        except (TruncationError, AccuracyError) as e:
            run.status = JobStatus.aborted
            run.error = f"{type(e).__name__}: {e}"
            logger.error(f"Run aborted: {run.error}")
            raise
        except Exception as e:
            run.status = JobStatus.failed
            run.error = f"{type(e).__name__}: {e}"
            logger.exception(f"Executor for {config.kind} raised")
            raise
        finally:
            run.finished_at = datetime.now(timezone.utc).isoformat()
            run.artifacts = sorted(store.artifacts)
            store.write_run_record(run.to_dict())
        return run
