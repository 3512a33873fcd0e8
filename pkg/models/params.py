"""
Physical parameters of the driven optomechanical cavity.

All rates are angular frequencies in units where hbar = 1; presets measure
them in units of the total cavity decay kappa = kappa_d + kappa_l.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List


@dataclass(frozen=True)
class DetuningRegime:
    """Delta = -n g^2 / omega_m favours the n-photon transition (0 resonance, 1 blockade, 2 cascade)."""
    n: int

    def __post_init__(self):
        if int(self.n) < 0:
            raise ValueError(f"Detuning regime must be >= 0, got {self.n}")


@dataclass(frozen=True)
class SystemParams:
    delta: float
    omega_m: float
    g: float
    omega_drive: complex = 0j
    kappa_d: float = 1.0
    kappa_l: float = 0.0
    gamma: float = 0.0
    mbar: float = 0.0

    def __post_init__(self):
        if self.omega_m <= 0:
            raise ValueError(f"omega_m must be positive, got {self.omega_m}")
        for name in ("g", "kappa_d", "kappa_l", "gamma", "mbar"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)}")
        object.__setattr__(self, "omega_drive", complex(self.omega_drive))

    @property
    def kappa(self) -> float:
        """Total cavity decay rate kappa_d + kappa_l."""
        return self.kappa_d + self.kappa_l

    @property
    def k(self) -> float:
        """Dimensionless coupling g / omega_m."""
        return self.g / self.omega_m

    def with_updates(self, **changes: Any) -> "SystemParams":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["omega_drive"] = [self.omega_drive.real, self.omega_drive.imag]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemParams":
        drive = data.get("omega_drive", 0.0)
        if isinstance(drive, (list, tuple)):
            drive = complex(float(drive[0]), float(drive[1]))
        kwargs = {f.name: data[f.name] for f in fields(cls) if f.name in data and f.name != "omega_drive"}
        return cls(omega_drive=complex(drive), **{k: float(v) for k, v in kwargs.items()})

    def fingerprint(self) -> str:
        """Stable short hash of the parameter values (repr-exact floats)."""
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


REAL_FIELDS: List[str] = [f.name for f in fields(SystemParams) if f.name != "omega_drive"]
