"""
Config gates.

`resolve_config` turns a config file, a preset and CLI overrides into a
validated ExperimentConfig (raising ConfigError with pydantic's error list).
`validate_config` runs the same resolution and adds the physics checks a run
depends on: the nonlinearity condition and a truncation-leakage estimate
from a short probe evolution.
"""

from __future__ import annotations

import json
import logging
import math
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from core.closed import evolve_closed, rescaled_rates
from core.errors import ConfigError
from core.fock import coherent_state, product_state, truncation_leakage
from core.hamiltonians import nonlinearity_check
from core.master import integrate_master
from core.schemas import ExperimentConfig, as_complex
from core.trajectory import LEAKAGE_LIMIT
from models.presets import get_preset_config

logger = logging.getLogger(__name__)

PROBE_TIME = 5.0
LEAKAGE_WARNING = 1e-3


def _pydantic_errors(e: ValidationError) -> List[Dict[str, Any]]:
    errs: List[Dict[str, Any]] = []
    for item in e.errors():
        errs.append(
            {
                "loc": list(item.get("loc", [])),
                "msg": item.get("msg"),
                "type": item.get("type"),
            }
        )
    return errs


def _describe(errors: List[Dict[str, Any]]) -> str:
    return "; ".join(".".join(str(p) for p in e["loc"]) + f": {e['msg']}" for e in errors)


def load_config_document(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        err = {"loc": [f"line {e.lineno}", f"column {e.colno}"], "msg": e.msg, "type": "json_invalid"}
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}", [err]) from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object", [{"loc": [], "msg": "not_an_object", "type": "type"}])
    return data


def _merge(base: Dict[str, Any], update: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        errors = _pydantic_errors(e)
        raise ConfigError(f"Config failed schema validation: {_describe(errors)}", errors) from e


def resolve_config(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Preset (if any), then the file on top of it, then non-None top-level overrides.
    A file naming its own `preset` pulls that preset in as the base.
    """
    data: Dict[str, Any] = {}
    document = load_config_document(path) if path else {}
    preset = preset or document.get("preset")
    if preset:
        try:
            data = get_preset_config(preset)
        except KeyError as e:
            raise ConfigError(str(e.args[0]), [{"loc": ["preset"], "msg": str(e.args[0]), "type": "unknown_preset"}]) from e
    data = _merge(data, document)
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    if not data:
        raise ConfigError("Either a config file or a preset is required")
    return parse_config(data)


def probe_leakage(config: ExperimentConfig) -> Dict[str, float]:
    """Top-level populations after a short probe evolution at the configured cutoffs."""
    space = config.space.to_space()
    params = config.system.to_params()
    block = config.kind_block()
    if config.kind == "entanglement" and block.dynamics == "closed":
        k, r = rescaled_rates(params, no_click=False)
        start = product_state(
            coherent_state(as_complex(block.alpha), space.dim_cavity),
            coherent_state(as_complex(block.beta), space.dim_mech),
        )
        # mechanical displacement is largest half way through a period
        state = evolve_closed(start, math.pi, k, r, space)
        probe_t = math.pi
    else:
        initial = config.initial.to_state(space, params.mbar)
        state = integrate_master(initial, 0.0, PROBE_TIME, params, space, config.step.to_control())
        probe_t = PROBE_TIME
    cavity, mech = truncation_leakage(state, space)
    return {"t": probe_t, "cavity": cavity, "mech": mech}


def validate_config(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    probe: bool = True,
) -> Tuple[bool, str, Dict[str, Any], Dict[str, Any]]:
    """
    Validate a config file (or preset).

    Returns:
        (passed, message, details, normalized_config)
    """
    try:
        config = resolve_config(path, preset)
    except ConfigError as e:
        return False, str(e), {"errors": e.errors}, {}

    normalized = config.model_dump(mode="json")
    params = config.system.to_params()
    g_kappa, g2_wk, nonlinear = nonlinearity_check(params)
    details: Dict[str, Any] = {
        "delta": params.delta,
        "fingerprint": params.fingerprint(),
        "nonlinearity": {"g_over_kappa": g_kappa, "g2_over_omega_kappa": g2_wk, "nonlinear": nonlinear},
        "warnings": [],
    }
    if not nonlinear:
        details["warnings"].append("nonlinearity condition not met (g/kappa and g^2/(omega_m kappa) should exceed 1)")

    if probe:
        leak = probe_leakage(config)
        details["probe_leakage"] = leak
        worst = max(leak["cavity"], leak["mech"])
        if worst > LEAKAGE_LIMIT:
            return (
                False,
                f"Probe leakage {worst:.2e} at t={leak['t']:.3g} exceeds {LEAKAGE_LIMIT:.0e}; raise the cutoffs",
                details,
                normalized,
            )
        if worst > LEAKAGE_WARNING:
            details["warnings"].append(f"probe leakage {worst:.2e} above {LEAKAGE_WARNING:.0e}")

    logger.info(f"Config valid: kind={config.kind}, preset={config.preset}, nonlinear={nonlinear}")
    return True, "Config valid.", details, normalized
