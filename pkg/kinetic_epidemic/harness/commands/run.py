"""run: one scenario to its end time."""

from typing import Any, Dict, Optional

from ...scenario.build import build_simulation
from ..runner import run_simulation
from .base import SCENARIO_PROPERTIES, Command, logger, register_command


class RunCommand(Command):
    @property
    def name(self) -> str:
        return "run"

    @property
    def description(self) -> Optional[str]:
        return "Run a scenario and write timeseries.csv, regions/*.csv, snapshots and report.json"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {"type": "object", "properties": dict(SCENARIO_PROPERTIES), "additionalProperties": False}

    def execute(self, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        config = self.scenario_config(arguments)
        sim = build_simulation(config)
        out = self.output_directory(arguments, config.output.directory or f"output/{config.name}")
        result = run_simulation(sim, out)
        logger.info(f"Outputs in {out}")
        return result.report.to_dict()


register_command(RunCommand())
