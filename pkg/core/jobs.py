"""
Worker pool and run bookkeeping.

Trajectories, theta-grid likelihoods and bound grid points are independent
tasks. `WorkerPool.map` fans them out over processes and returns results in
submission order, so output never depends on the worker count.

Note: tasks and their arguments must be picklable (module-level functions,
frozen dataclasses, numpy arrays).
"""

from __future__ import annotations

import logging
import os
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

MAX_EVENTS = 200


def default_workers() -> int:
    workers = int(os.environ.get("OPTOMECH_WORKERS", "1") or "1")
    return max(1, workers)


class JobStatus(str, Enum):
    queued = "queued"
    running = "running"
    succeeded = "succeeded"
    failed = "failed"
    aborted = "aborted"  # truncation or accuracy guard tripped


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunRecord:
    run_id: str = field(default_factory=lambda: str(uuid.uuid4()))
    kind: str = ""
    preset: Optional[str] = None
    status: JobStatus = JobStatus.queued
    created_at: str = field(default_factory=_now)
    started_at: Optional[str] = None
    finished_at: Optional[str] = None
    error: Optional[str] = None
    artifacts: List[str] = field(default_factory=list)
    progress: Dict[str, Any] = field(default_factory=dict)
    events: List[Dict[str, Any]] = field(default_factory=list)

    def append_event(self, kind: str, message: str, **extra: Any) -> None:
        self.events.append({"ts": _now(), "kind": kind, "message": message, **extra})
        if len(self.events) > MAX_EVENTS:
            self.events = self.events[-MAX_EVENTS:]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "kind": self.kind,
            "preset": self.preset,
            "status": self.status.value,
            "created_at": self.created_at,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "error": self.error,
            "artifacts": list(self.artifacts),
            "progress": self.progress,
            "events": self.events[-MAX_EVENTS:],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunRecord":
        return cls(
            run_id=str(data.get("run_id")),
            kind=str(data.get("kind", "")),
            preset=data.get("preset"),
            status=JobStatus(str(data.get("status", JobStatus.queued.value))),
            created_at=str(data.get("created_at", _now())),
            started_at=data.get("started_at"),
            finished_at=data.get("finished_at"),
            error=data.get("error"),
            artifacts=list(data.get("artifacts") or []),
            progress=data.get("progress") or {},
            events=data.get("events") or [],
        )


class WorkerPool:
    """Order-preserving map over a process pool; runs inline for a single worker."""

    def __init__(self, workers: Optional[int] = None):
        self.workers = max(1, int(workers if workers is not None else default_workers()))

    def map(self, fn: Callable[[T], R], items: Iterable[T], label: str = "tasks") -> List[R]:
        items = list(items)
        if not items:
            return []
        if self.workers == 1 or len(items) == 1:
            results = [fn(item) for item in items]
        else:
            n = min(self.workers, len(items))
            logger.info(f"Dispatching {len(items)} {label} to {n} workers")
            with ProcessPoolExecutor(max_workers=n) as executor:
                results = list(executor.map(fn, items))
        logger.debug(f"Collected {len(results)} {label}")
        return results
