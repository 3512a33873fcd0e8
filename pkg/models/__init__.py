# Models for the optomechanical sensing toolkit
from .space import FockSpace, State
from .params import SystemParams
from .records import ClickRecord
from .presets import PRESET_REGISTRY, PresetDefinition
