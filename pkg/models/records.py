"""
Click records: ordered jump events with channel tags and the observation window.

Serialised as JSON lines: a header object, then one {"t": ..., "ch": ...}
object per event. Floats are written with repr precision, so a dump/load
cycle is bit-exact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List

import numpy as np

RECORD_FORMAT_VERSION = 1


class Channel(str, Enum):
    PHOTON_DETECTED = "photon_detected"
    PHOTON_LOST = "photon_lost"
    PHONON_DOWN = "phonon_down"
    PHONON_UP = "phonon_up"


class UnravellingMode(str, Enum):
    FULL = "full"          # pure states, every channel monitored
    DETECTOR = "detector"  # densities, only detected photons recorded


@dataclass(frozen=True)
class ClickEvent:
    time: float
    channel: Channel = Channel.PHOTON_DETECTED

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.time, "ch": self.channel.value}


@dataclass
class ClickRecord:
    events: List[ClickEvent]
    t_end: float
    seed: int = 0
    params_fingerprint: str = ""
    mode: UnravellingMode = UnravellingMode.DETECTOR
    dim_cavity: int = 0
    dim_mech: int = 0
    stream: int = 0
    version: int = RECORD_FORMAT_VERSION
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.mode = UnravellingMode(self.mode)
        last = -np.inf
        for ev in self.events:
            if not (0.0 <= ev.time <= self.t_end):
                raise ValueError(f"Event time {ev.time} outside [0, {self.t_end}]")
            if ev.time <= last:
                raise ValueError(f"Event times must be strictly increasing ({ev.time} after {last})")
            last = ev.time
            if self.mode == UnravellingMode.DETECTOR and ev.channel != Channel.PHOTON_DETECTED:
                raise ValueError(f"Detector-mode record cannot contain {ev.channel.value} events")

    def photon_times(self) -> np.ndarray:
        return np.array([ev.time for ev in self.events if ev.channel == Channel.PHOTON_DETECTED], dtype=float)

    def click_count(self) -> int:
        return int(sum(1 for ev in self.events if ev.channel == Channel.PHOTON_DETECTED))

    def truncated(self, t: float) -> "ClickRecord":
        """Record restricted to the window [0, t]."""
        t = min(float(t), self.t_end)
        return ClickRecord(
            events=[ev for ev in self.events if ev.time <= t],
            t_end=t,
            seed=self.seed,
            params_fingerprint=self.params_fingerprint,
            mode=self.mode,
            dim_cavity=self.dim_cavity,
            dim_mech=self.dim_mech,
            stream=self.stream,
            version=self.version,
            metadata=dict(self.metadata),
        )

    def header(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "seed": self.seed,
            "stream": self.stream,
            "params_fingerprint": self.params_fingerprint,
            "mode": self.mode.value,
            "t_end": self.t_end,
            "dim_cavity": self.dim_cavity,
            "dim_mech": self.dim_mech,
            "metadata": self.metadata,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines.extend(json.dumps(ev.to_dict(), sort_keys=True) for ev in self.events)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ClickRecord":
        from core.schemas import ClickEventModel, RecordHeaderModel

        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("Empty click-record document")
        header = RecordHeaderModel.model_validate_json(lines[0])
        events = []
        for ln in lines[1:]:
            ev = ClickEventModel.model_validate_json(ln)
            events.append(ClickEvent(time=ev.t, channel=Channel(ev.ch)))
        return cls(
            events=events,
            t_end=header.t_end,
            seed=header.seed,
            params_fingerprint=header.params_fingerprint,
            mode=UnravellingMode(header.mode),
            dim_cavity=header.dim_cavity,
            dim_mech=header.dim_mech,
            stream=header.stream,
            version=header.version,
            metadata=header.metadata,
        )

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()[:16]

    def to_dict(self) -> Dict[str, Any]:
        data = self.header()
        data["events"] = [ev.to_dict() for ev in self.events]
        return data


def split_lines(text: str) -> List[str]:
    """Split a multi-record JSON-lines document at header lines."""
    docs: List[List[str]] = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if '"params_fingerprint"' in ln:
            docs.append([ln])
        elif docs:
            docs[-1].append(ln)
    return ["\n".join(d) + "\n" for d in docs]


def load_records(text: str) -> List[ClickRecord]:
    return [ClickRecord.from_jsonl(doc) for doc in split_lines(text)]


def dump_records(records: List[ClickRecord]) -> str:
    return "".join(r.to_jsonl() for r in records)
