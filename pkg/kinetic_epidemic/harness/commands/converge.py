"""converge: self-convergence tables on nested refinements."""

import json
from typing import Any, Dict, Optional

from ...errors import ArgumentError
from ...scenario.build import build_scenario_mesh
from ...scenario.presets import CONVERGENCE_REGIMES
from ...scenario.units import UnitScales
from ..convergence import advection_self_test, convergence_study
from .base import SCENARIO_PROPERTIES, Command, logger, register_command


class ConvergeCommand(Command):
    default_preset = "convergence"

    @property
    def name(self) -> str:
        return "converge"

    @property
    def description(self) -> Optional[str]:
        return "L1 self-convergence orders per regime (defaults to the smooth SIR convergence problem)"

    @property
    def input_schema(self) -> Dict[str, Any]:
        props = dict(SCENARIO_PROPERTIES)
        props.update({
            "chi": {"type": "array", "description": "ascending refinement factors"},
            "regime": {"type": "array", "description": f"regime names from {sorted(CONVERGENCE_REGIMES)}"},
            "self_test": {"type": "boolean", "description": "also run the linear advection self-test"},
        })
        return {"type": "object", "properties": props, "additionalProperties": False}

    def execute(self, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        config = self.scenario_config(arguments)
        chis = [int(c) for c in (arguments.get("chi") or (1, 2, 4))]
        names = arguments.get("regime") or list(CONVERGENCE_REGIMES)
        unknown = [n for n in names if n not in CONVERGENCE_REGIMES]
        if unknown:
            raise ArgumentError(f"unknown regime(s) {unknown}, expected {sorted(CONVERGENCE_REGIMES)}")
        tables = convergence_study(config, chis, {n: CONVERGENCE_REGIMES[n] for n in names})
        for table in tables:
            logger.info("\n" + table.format())
        result: Dict[str, Any] = {"tables": [t.to_dict() for t in tables]}
        if arguments.get("self_test"):
            base = build_scenario_mesh(config, UnitScales.from_spec(config.units))
            advection = advection_self_test(base)
            logger.info("\n" + advection.format())
            result["advection"] = advection.to_dict()
        out = self.output_directory(arguments)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / "convergence.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        return result


register_command(ConvergeCommand())
