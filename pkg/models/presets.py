"""
Experiment presets, one per figure or appendix study.

Each preset carries a complete experiment config in the JSON shape accepted
by `core.schemas.ExperimentConfig`. Rates are in units of the total cavity
decay kappa = kappa_d + kappa_l = 1.
"""

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List


class PresetGroup(Enum):
    """Which part of the study a preset reproduces."""
    ENTANGLEMENT = "entanglement"
    CORRELATIONS = "correlations"
    SENSING = "sensing"
    BOUNDS = "bounds"
    APPENDIX = "appendix"


@dataclass
class PresetDefinition:
    """A named, runnable experiment."""
    preset_id: str
    name: str
    group: PresetGroup
    purpose: str
    config: Dict[str, Any]
    checks: List[str] = field(default_factory=list)  # what a run should show


# =============================================================================
# SHARED PARAMETERS
# =============================================================================

def sensing_system(regime: int, g: float = 4.0) -> Dict[str, Any]:
    """g/4 = omega_m/(4 sqrt 2) = kappa, 10% undetected loss, weak drive."""
    omega_m = 4.0 * math.sqrt(2.0)
    return {
        "omega_m": omega_m,
        "g": g,
        "regime": regime,
        "omega_drive": 0.3 / omega_m,
        "kappa_d": 0.9,
        "kappa_l": 0.1,
        "gamma": 1e-3 * omega_m,
        "mbar": 1.0,
    }


NEAR_LINEAR_SYSTEM: Dict[str, Any] = {
    "omega_m": 1.0,
    "g": 1.0,
    "delta": 0.0,
    "omega_drive": 1.0,
    "kappa_d": 0.9,
    "kappa_l": 0.1,
    "gamma": 1.0,
    "mbar": 1.0,
}

WIDE_PRIOR = {"theta_min": 2.0, "theta_max": 10.0, "alpha": -1000.0}
SENSING_SPACE = {"dim_cavity": 5, "dim_mech": 10}


def _sensing_preset(regime: int) -> PresetDefinition:
    label = {0: "on-resonance", 1: "blockade", 2: "cascade"}[regime]
    return PresetDefinition(
        preset_id=f"fig5-n{regime}",
        name=f"Posterior over g, {label} regime",
        group=PresetGroup.SENSING,
        purpose="Infer g from one detector record generated at g = 4",
        config={
            "kind": "infer",
            "seed": 11 + regime,
            "system": sensing_system(regime),
            "space": dict(SENSING_SPACE),
            "infer": {"parameter": "g", "truth": 4.0, "prior": dict(WIDE_PRIOR), "t_end": 1000.0},
        },
        checks=[
            "posterior mean near 4 at t_end" if regime else "posterior stays broad at t_end",
        ],
    )


def _negativity_preset(regime: int) -> PresetDefinition:
    return PresetDefinition(
        preset_id=f"fig3-n{regime}",
        name=f"Negativity along a click record, n = {regime}",
        group=PresetGroup.ENTANGLEMENT,
        purpose="Ensemble and conditional negativity with click markers",
        config={
            "kind": "entanglement",
            "seed": 3 + regime,
            "system": sensing_system(regime),
            "entanglement": {"dynamics": "open", "t_end": 200.0, "sample_dt": 0.5},
        },
        checks=["negativity jumps up at clicks and relaxes toward the ensemble value"],
    )


# =============================================================================
# PRESETS
# =============================================================================

FIG2 = PresetDefinition(
    preset_id="fig2",
    name="Next-emission map, cascade minus blockade",
    group=PresetGroup.CORRELATIONS,
    purpose="zeta(t1, dt) for n = 2 and n = 1 and their difference",
    config={
        "kind": "zeta",
        "seed": 2,
        "system": sensing_system(1),
        "zeta": {"t_end": 200.0, "trajectories": 300, "bins": 25, "relative": True, "dt_max": 20.0, "regimes": [2, 1]},
    },
    checks=["difference positive for dt <= 2", "difference negative for 2 <= dt <= 10"],
)

FIG4 = PresetDefinition(
    preset_id="fig4",
    name="g2 per detuning regime",
    group=PresetGroup.CORRELATIONS,
    purpose="g2(t1, t1 + dt) early and in the stationary regime for n = 0, 1, 2",
    config={
        "kind": "g2",
        "system": sensing_system(1),
        "g2": {
            "t1_values": [10.0, 150.0],
            "dt_values": [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0],
            "regimes": [0, 1, 2],
        },
    },
    checks=["stationary g2(0) ordering n=2 > n=1"],
)

# regime detunings stay at their g = 4 values while g = 5
_G5_SYSTEM = sensing_system(1, g=5.0)

FIG4_G5 = PresetDefinition(
    preset_id="fig4-g5",
    name="g2 at g = 5 with g = 4 detunings",
    group=PresetGroup.CORRELATIONS,
    purpose="Inset comparison: raise g while keeping each regime's detuning",
    config={
        "kind": "g2",
        "system": _G5_SYSTEM,
        "g2": {
            "t1_values": [10.0, 150.0],
            "dt_values": [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0],
            "regimes": [0, 1, 2],
            "regime_coupling": 4.0,
        },
    },
)

FIG6 = PresetDefinition(
    preset_id="fig6",
    name="Quantum van Trees bound, ensemble and conditional",
    group=PresetGroup.BOUNDS,
    purpose="Single-shot bound along a record, with and without the mechanics",
    config={
        "kind": "bounds",
        "seed": 6,
        "system": sensing_system(1),
        "space": dict(SENSING_SPACE),
        "bounds": {
            "kinds": ["QVanTrees"],
            "parameter": "g",
            "prior": dict(WIDE_PRIOR),
            "source": "both",
            "reduce_to_cavity": True,
            "t_end": 200.0,
            "checkpoint_every": 1.0,
        },
    },
    checks=["bound drops at clicks", "reduced-cavity bound never below the full bound"],
)

APP_A = PresetDefinition(
    preset_id="appA",
    name="Closed-system linear entropy with jumps",
    group=PresetGroup.APPENDIX,
    purpose="Analytic purity against evolution; no-click evolution with jumps at 9.8 pi and 11 pi",
    config={
        "kind": "entanglement",
        "system": {"omega_m": 1.0, "g": 1.0, "delta": 0.0, "kappa_d": 0.04},
        "space": {"dim_cavity": 12, "dim_mech": 160},
        "entanglement": {
            "dynamics": "closed",
            "alpha": 1.0,
            "beta": 1.0,
            "t_prime_end": 16.0 * math.pi,
            "points": 400,
            "jump_times": [9.8 * math.pi, 11.0 * math.pi],
            "no_click": True,
        },
    },
    checks=["closed evolution returns to a product state every 2 pi", "entropy after a jump vanishes again at the next multiple of 2 pi"],
)


def _near_linear_preset(parameter: str) -> PresetDefinition:
    return PresetDefinition(
        preset_id=f"appB-{'g' if parameter == 'g' else 'omega'}",
        name=f"Posterior over {parameter} outside the sideband-resolved regime",
        group=PresetGroup.APPENDIX,
        purpose="Inference with Delta = 0 and Omega = g = omega_m = gamma = kappa",
        config={
            "kind": "infer",
            "seed": 21 if parameter == "g" else 22,
            "system": dict(NEAR_LINEAR_SYSTEM),
            "space": {"dim_cavity": 8, "dim_mech": 16},
            "infer": {
                "parameter": parameter,
                "truth": 1.0,
                "prior": {"theta_min": 0.0, "theta_max": 10.0, "alpha": -1000.0},
                "t_end": 1000.0,
            },
        },
        checks=["order 300 detected photons per record"],
    )


APP_C_AVG = PresetDefinition(
    preset_id="appC-avg",
    name="Trajectory-averaged MSE, perfect and lossy detection",
    group=PresetGroup.APPENDIX,
    purpose="Average the MSE of 20 records per regime and detector efficiency",
    config={
        "kind": "infer",
        "seed": 31,
        "system": sensing_system(1),
        "space": dict(SENSING_SPACE),
        "infer": {
            "parameter": "g",
            "truth": 4.0,
            "prior": dict(WIDE_PRIOR),
            "t_end": 1000.0,
            "records": 20,
            "variants": [
                {"name": "n1-lossy", "regime": 1},
                {"name": "n1-perfect", "regime": 1, "kappa_d": 1.0, "kappa_l": 0.0},
                {"name": "n2-lossy", "regime": 2},
                {"name": "n2-perfect", "regime": 2, "kappa_d": 1.0, "kappa_l": 0.0},
            ],
        },
    },
    checks=["averaged MSE decreases for every variant", "perfect and lossy curves agree within a factor 2"],
)

APP_C_DETUNING = PresetDefinition(
    preset_id="appC-detuning",
    name="MSE under detuning miscalibration",
    group=PresetGroup.APPENDIX,
    purpose="Records generated and inferred at 0.9 and 1.1 times the ideal detuning",
    config={
        "kind": "infer",
        "seed": 41,
        "system": sensing_system(1),
        "space": dict(SENSING_SPACE),
        "infer": {
            "parameter": "g",
            "truth": 4.0,
            "prior": dict(WIDE_PRIOR),
            "t_end": 1000.0,
            "variants": [
                {"name": f"n{n}-{scale}", "regime": n, "delta_scale": scale}
                for n in (1, 2)
                for scale in (1.0, 0.9, 1.1)
            ],
        },
    },
    checks=["perturbed MSE at t_end within a factor 3 of the ideal detuning"],
)


PRESET_REGISTRY: Dict[str, PresetDefinition] = {
    preset.preset_id: preset
    for preset in [
        FIG2,
        _negativity_preset(0),
        _negativity_preset(1),
        _negativity_preset(2),
        FIG4,
        FIG4_G5,
        _sensing_preset(0),
        _sensing_preset(1),
        _sensing_preset(2),
        FIG6,
        APP_A,
        _near_linear_preset("g"),
        _near_linear_preset("omega_m"),
        APP_C_AVG,
        APP_C_DETUNING,
    ]
}


def get_preset(preset_id: str) -> PresetDefinition:
    if preset_id not in PRESET_REGISTRY:
        known = ", ".join(sorted(PRESET_REGISTRY))
        raise KeyError(f"Unknown preset '{preset_id}'. Known presets: {known}")
    return PRESET_REGISTRY[preset_id]


def get_preset_config(preset_id: str) -> Dict[str, Any]:
    """Deep copy of the preset's config with its id filled in."""
    config = copy.deepcopy(get_preset(preset_id).config)
    config["preset"] = preset_id
    return config


def get_presets_by_group(group: PresetGroup) -> List[PresetDefinition]:
    return [p for p in PRESET_REGISTRY.values() if p.group == group]
