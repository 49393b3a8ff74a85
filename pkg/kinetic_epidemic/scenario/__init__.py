"""
Scenario documents, data ingestion, field builders and presets.
"""

from .build import Simulation, build_fields, build_scenario_mesh, build_simulation
from .config import ScenarioConfig, config_with_overrides, dump_scenario, load_scenario, validate_config
from .fields import BuildContext, evaluate_field, field_builders
from .ingest import City, MobilityMatrix, load_connections, read_cities, read_mobility
from .initial import commuter_split, gaussian_city_ic, initial_builders
from .presets import PRESETS, parse_preset_args, resolve_preset
from .units import UnitScales

__all__ = [
    "BuildContext",
    "City",
    "MobilityMatrix",
    "PRESETS",
    "ScenarioConfig",
    "Simulation",
    "UnitScales",
    "build_fields",
    "build_scenario_mesh",
    "build_simulation",
    "commuter_split",
    "config_with_overrides",
    "dump_scenario",
    "evaluate_field",
    "field_builders",
    "gaussian_city_ic",
    "initial_builders",
    "load_connections",
    "load_scenario",
    "parse_preset_args",
    "read_cities",
    "read_mobility",
    "resolve_preset",
    "validate_config",
]
