"""
Command handler base and the command registry.

Commands receive the parsed CLI options as a dict; every module of this
package registers its command at import time.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

from ...errors import ArgumentError
from ...handler_base import BaseHandler, HandlerRegistry
from ...scenario.config import ScenarioConfig, config_with_overrides, dump_scenario, load_scenario
from ...scenario.presets import parse_preset_args, resolve_preset

logger = logging.getLogger("KineticEpidemic.CLI")

# options every scenario-driven command accepts
SCENARIO_PROPERTIES: Dict[str, Any] = {
    "scenario": {"type": "string", "description": "scenario JSON path"},
    "preset": {"type": "string", "description": "built-in scenario name"},
    "preset_arg": {"type": "array", "description": "preset arguments key=value"},
    "set": {"type": "array", "description": "overrides key.path=value"},
    "cfl": {"type": "number", "minimum": 0, "maximum": 1},
    "ordinates": {"type": "integer", "minimum": 1, "maximum": 64},
    "out": {"type": "string"},
    "dump_scenario": {"type": "string"},
    "threads": {"type": "integer", "minimum": 1},
}


class Command(BaseHandler):
    """A CLI subcommand."""

    default_preset: Optional[str] = None

    def scenario_config(self, arguments: Dict[str, Any]) -> ScenarioConfig:
        """Scenario from --scenario or --preset, then --set / --cfl / --ordinates."""
        overrides: List[str] = list(arguments.get("set") or [])
        if arguments.get("cfl") is not None:
            overrides.append(f"time.cfl={arguments['cfl']!r}")
        if arguments.get("ordinates") is not None:
            overrides.append(f"model.velocity_nodes_per_quadrant={int(arguments['ordinates'])}")
        path = arguments.get("scenario")
        preset = arguments.get("preset")
        if path and preset:
            raise ArgumentError("give either --scenario or --preset, not both")
        if path:
            config = load_scenario(path, overrides)
        else:
            preset = preset or self.default_preset
            if preset is None:
                raise ArgumentError(f"{self.name} needs --scenario or --preset")
            config = config_with_overrides(resolve_preset(preset, parse_preset_args(arguments.get("preset_arg"))),
                                           overrides)
        if arguments.get("dump_scenario"):
            written = dump_scenario(config, arguments["dump_scenario"])
            logger.info(f"Resolved scenario written to {written}")
        return config

    @staticmethod
    def output_directory(arguments: Dict[str, Any], fallback: Optional[str] = None) -> Optional[Path]:
        out = arguments.get("out") or fallback
        return Path(out) if out else None


commands: HandlerRegistry[Command] = HandlerRegistry("command")


def register_command(handler: Command) -> None:
    commands.register(handler)
