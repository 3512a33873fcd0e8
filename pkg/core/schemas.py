"""
Pydantic schemas for experiment configs and click-record lines.

Configs are strict: unknown keys are rejected at every level, and every
rate carries its sign constraint, so a bad file fails with the offending key
in the error location.
"""

from __future__ import annotations

from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from core.fock import initial_state
from core.hamiltonians import detuning_for_regime
from core.integrators import StepControl
from models.params import SystemParams
from models.results import PriorSpec
from models.space import FockSpace, State

CONFIG_VERSION = 1

ComplexLike = Union[float, Tuple[float, float]]


def as_complex(value: ComplexLike) -> complex:
    if isinstance(value, (tuple, list)):
        return complex(float(value[0]), float(value[1]))
    return complex(float(value))


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# ---------------------------------------------------------------------------
# Click records
# ---------------------------------------------------------------------------

class RecordHeaderModel(StrictModel):
    version: int = Field(ge=1)
    seed: int
    stream: int = Field(default=0, ge=0)
    params_fingerprint: str
    mode: Literal["full", "detector"]
    t_end: float = Field(ge=0)
    dim_cavity: int = Field(ge=0)
    dim_mech: int = Field(ge=0)
    metadata: Dict[str, Any] = Field(default_factory=dict)


class ClickEventModel(StrictModel):
    t: float = Field(ge=0)
    ch: Literal["photon_detected", "photon_lost", "phonon_down", "phonon_up"]


# ---------------------------------------------------------------------------
# Experiment config
# ---------------------------------------------------------------------------

class SystemModel(StrictModel):
    omega_m: float = Field(gt=0)
    g: float = Field(ge=0)
    delta: Optional[float] = None
    regime: Optional[int] = Field(default=None, ge=0)
    omega_drive: ComplexLike = 0.0
    kappa_d: float = Field(default=1.0, ge=0)
    kappa_l: float = Field(default=0.0, ge=0)
    gamma: float = Field(default=0.0, ge=0)
    mbar: float = Field(default=0.0, ge=0)

    @model_validator(mode="after")
    def _detuning_given(self) -> "SystemModel":
        if self.delta is None and self.regime is None:
            raise ValueError("one of 'delta' or 'regime' is required")
        if self.kappa_d + self.kappa_l <= 0:
            raise ValueError("kappa_d + kappa_l must be positive")
        return self

    def resolved_delta(self) -> float:
        if self.delta is not None:
            return float(self.delta)
        return detuning_for_regime(int(self.regime), self.g, self.omega_m)

    def to_params(self) -> SystemParams:
        return SystemParams(
            delta=self.resolved_delta(),
            omega_m=self.omega_m,
            g=self.g,
            omega_drive=as_complex(self.omega_drive),
            kappa_d=self.kappa_d,
            kappa_l=self.kappa_l,
            gamma=self.gamma,
            mbar=self.mbar,
        )


class SpaceModel(StrictModel):
    dim_cavity: int = Field(default=6, ge=2)
    dim_mech: int = Field(default=12, ge=2)

    def to_space(self) -> FockSpace:
        return FockSpace(self.dim_cavity, self.dim_mech)


class StepModel(StrictModel):
    step: float = Field(default=0.005, gt=0)
    tolerance: float = Field(default=1e-8, gt=0)
    adaptive: bool = True

    def to_control(self) -> StepControl:
        return StepControl(step=self.step, tolerance=self.tolerance, adaptive=self.adaptive)


class InitialModel(StrictModel):
    """Cavity coherent amplitude (vacuum by default) times a thermal or coherent mechanical state."""
    cavity_amplitude: ComplexLike = 0.0
    mech_thermal: bool = True
    mech_amplitude: ComplexLike = 0.0

    def to_state(self, space: FockSpace, mbar: float) -> State:
        return initial_state(
            space,
            mbar=mbar,
            cavity_amplitude=as_complex(self.cavity_amplitude),
            mech_amplitude=as_complex(self.mech_amplitude),
            mech_thermal=self.mech_thermal,
        )


class PriorModel(StrictModel):
    theta_min: float
    theta_max: float
    alpha: float = -1000.0

    @model_validator(mode="after")
    def _ordered(self) -> "PriorModel":
        if not self.theta_max > self.theta_min:
            raise ValueError("theta_max must exceed theta_min")
        return self

    def to_spec(self) -> PriorSpec:
        return PriorSpec(self.theta_min, self.theta_max, self.alpha)


class SimulateBlock(StrictModel):
    t_end: float = Field(gt=0)
    trajectories: int = Field(default=1, ge=1)
    mode: Literal["full", "detector"] = "detector"
    checkpoints: int = Field(default=10, ge=0)


class EntanglementBlock(StrictModel):
    dynamics: Literal["closed", "open"] = "open"
    # closed (rescaled time t' = omega_m t)
    alpha: ComplexLike = 1.0
    beta: ComplexLike = 1.0
    t_prime_end: float = Field(default=8.0 * 3.141592653589793, gt=0)
    points: int = Field(default=400, ge=2)
    jump_times: List[float] = Field(default_factory=list)
    no_click: bool = True
    # open (conditional replay of a sampled record)
    t_end: float = Field(default=200.0, gt=0)
    sample_dt: float = Field(default=1.0, gt=0)
    click_offset: float = Field(default=0.01, gt=0)


class G2Block(StrictModel):
    t1_values: List[float] = Field(default_factory=lambda: [150.0], min_length=1)
    dt_values: List[float] = Field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 5.0, 10.0], min_length=1)
    regimes: List[int] = Field(default_factory=list)
    # coupling used to derive each regime detuning; defaults to system.g
    regime_coupling: Optional[float] = Field(default=None, ge=0)


class ZetaBlock(StrictModel):
    t_end: float = Field(default=200.0, gt=0)
    trajectories: int = Field(default=300, ge=1)
    bins: int = Field(default=25, ge=1)
    relative: bool = True
    dt_max: float = Field(default=20.0, gt=0)
    regimes: List[int] = Field(default_factory=list)


class VariantModel(StrictModel):
    name: str = Field(min_length=1)
    regime: Optional[int] = Field(default=None, ge=0)
    delta_scale: float = 1.0
    kappa_d: Optional[float] = Field(default=None, ge=0)
    kappa_l: Optional[float] = Field(default=None, ge=0)
    g: Optional[float] = Field(default=None, ge=0)


class InferBlock(StrictModel):
    parameter: str = "g"
    truth: Optional[float] = None
    prior: PriorModel
    grid_nodes: int = Field(default=81, ge=3)
    t_end: float = Field(default=1000.0, gt=0)
    checkpoint_every: float = Field(default=10.0, gt=0)
    dt_bin: float = Field(default=0.01, gt=0)
    converge_dt: bool = False
    couple_detuning: bool = False
    records: int = Field(default=1, ge=1)
    use_cache: bool = False
    variants: List[VariantModel] = Field(default_factory=list)


class BoundsBlock(StrictModel):
    kinds: List[Literal["CRB", "QCRB", "VanTrees", "QVanTrees"]] = Field(
        default_factory=lambda: ["QVanTrees"], min_length=1
    )
    parameter: str = "g"
    theta: Optional[float] = None
    prior: Optional[PriorModel] = None
    grid_nodes: int = Field(default=81, ge=3)
    source: Literal["ensemble", "conditional", "both"] = "both"
    reduce_to_cavity: bool = True
    t_end: float = Field(default=200.0, gt=0)
    checkpoint_every: float = Field(default=1.0, gt=0)
    delta_theta: float = Field(default=1e-3, gt=0)
    repetitions: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _prior_for_bayesian(self) -> "BoundsBlock":
        if any(k in ("VanTrees", "QVanTrees") for k in self.kinds) and self.prior is None:
            raise ValueError("van Trees bounds require a 'prior'")
        return self


KIND_BLOCKS = {
    "simulate": "simulate",
    "entanglement": "entanglement",
    "g2": "g2",
    "zeta": "zeta",
    "infer": "infer",
    "bounds": "bounds",
}


class ExperimentConfig(StrictModel):
    version: Literal[1] = CONFIG_VERSION
    kind: Literal["simulate", "entanglement", "g2", "zeta", "infer", "bounds"]
    preset: Optional[str] = None
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    out_dir: Optional[str] = None
    system: SystemModel
    space: SpaceModel = Field(default_factory=SpaceModel)
    step: StepModel = Field(default_factory=StepModel)
    initial: InitialModel = Field(default_factory=InitialModel)
    simulate: Optional[SimulateBlock] = None
    entanglement: Optional[EntanglementBlock] = None
    g2: Optional[G2Block] = None
    zeta: Optional[ZetaBlock] = None
    infer: Optional[InferBlock] = None
    bounds: Optional[BoundsBlock] = None

    @model_validator(mode="after")
    def _block_for_kind(self) -> "ExperimentConfig":
        block = KIND_BLOCKS[self.kind]
        if getattr(self, block) is None:
            defaults = {
                "simulate": None,
                "entanglement": EntanglementBlock,
                "g2": G2Block,
                "zeta": ZetaBlock,
                "infer": None,
                "bounds": None,
            }[block]
            if defaults is None:
                raise ValueError(f"experiment kind '{self.kind}' requires a '{block}' block")
            setattr(self, block, defaults())
        return self

    def kind_block(self) -> BaseModel:
        return getattr(self, KIND_BLOCKS[self.kind])
