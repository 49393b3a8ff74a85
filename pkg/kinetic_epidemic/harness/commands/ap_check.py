"""ap-check: kinetic runs against the reaction-diffusion reference as τ → 0."""

import json
from typing import Any, Dict, Optional

from ..ap import DEFAULT_TAUS, ap_study
from .base import SCENARIO_PROPERTIES, Command, logger, register_command


class APCheckCommand(Command):
    default_preset = "convergence"

    @property
    def name(self) -> str:
        return "ap_check"

    @property
    def description(self) -> Optional[str]:
        return "Relative L1 distance to the diffusion-limit solver for decreasing tau at fixed D"

    @property
    def input_schema(self) -> Dict[str, Any]:
        props = dict(SCENARIO_PROPERTIES)
        props.update({
            "tau": {"type": "array", "description": "relaxation times"},
            "diffusion": {"type": "number", "minimum": 0, "description": "D = lambda² tau / 2"},
        })
        return {"type": "object", "properties": props, "additionalProperties": False}

    def execute(self, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        config = self.scenario_config(arguments)
        taus = [float(t) for t in (arguments.get("tau") or DEFAULT_TAUS)]
        diffusion = arguments.get("diffusion")
        table = ap_study(config, taus, 0.5 if diffusion is None else float(diffusion))
        logger.info("\n" + table.format())
        result = {**table.to_dict(), "monotone": table.is_monotone()}
        out = self.output_directory(arguments)
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / "ap.json").write_text(json.dumps(result, indent=2) + "\n", encoding="utf-8")
        return result


register_command(APCheckCommand())
