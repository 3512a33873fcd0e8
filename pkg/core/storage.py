"""
File-based artifact persistence for experiment runs.

Every artifact is written atomically (tmp file + os.replace) and registered
with its sha256, so `write_manifest` can list the run's outputs. The
manifest holds no timestamps: identical config and seed give an identical
manifest. Run bookkeeping (timestamps, events) goes to run_record.json,
which the manifest does not list.

Set OPTOMECH_OUTPUT_DIR to change the default output root (./data/runs).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from models.records import ClickRecord, dump_records

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
RUN_RECORD_NAME = "run_record.json"


def default_output_dir() -> str:
    return os.environ.get("OPTOMECH_OUTPUT_DIR") or os.path.join(os.getcwd(), "data", "runs")


def _atomic_write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(tmp, path)


def _json_text(data: Any) -> str:
    return json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


@dataclass
class ArtifactStore:
    base_dir: str
    artifacts: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def path(self, name: str) -> str:
        return os.path.join(self.base_dir, name)

    def _register(self, name: str, text: str) -> str:
        data = text.encode("utf-8")
        self.artifacts[name] = {
            "path": name,
            "sha256": hashlib.sha256(data).hexdigest(),
            "bytes": len(data),
        }
        logger.debug(f"Wrote {name} ({len(data)} bytes)")
        return self.path(name)

    def write_text(self, name: str, text: str) -> str:
        _atomic_write_text(self.path(name), text)
        return self._register(name, text)

    def write_json(self, name: str, data: Any) -> str:
        return self.write_text(name, _json_text(data))

    def write_csv(
        self,
        name: str,
        columns: Sequence[str],
        rows: Sequence[Sequence[Any]],
        header: Optional[Dict[str, Any]] = None,
    ) -> str:
        """CSV with optional '# key: value' comment lines (fingerprints, prior, grid) above the column row."""
        buf = io.StringIO()
        for key, value in (header or {}).items():
            buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(columns))
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        return self.write_text(name, buf.getvalue())

    def write_records(self, name: str, records: List[ClickRecord]) -> str:
        return self.write_text(name, dump_records(records))

    def manifest(self, config: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "config": config,
            "artifacts": [self.artifacts[k] for k in sorted(self.artifacts)],
        }

    def write_manifest(self, config: Dict[str, Any]) -> str:
        text = _json_text(self.manifest(config))
        _atomic_write_text(self.path(MANIFEST_NAME), text)
        logger.info(f"Manifest lists {len(self.artifacts)} artifacts in {self.base_dir}")
        return self.path(MANIFEST_NAME)

    def write_run_record(self, data: Dict[str, Any]) -> str:
        _atomic_write_text(self.path(RUN_RECORD_NAME), _json_text(data))
        return self.path(RUN_RECORD_NAME)

