"""mesh-info: size and topology figures of a scenario mesh or a mesh file."""

from typing import Any, Dict, Optional

from ...mesh import mesh_size, read_mesh_file
from ...scenario.build import build_scenario_mesh
from ...scenario.units import UnitScales
from .base import SCENARIO_PROPERTIES, Command, logger, register_command


def mesh_summary(mesh) -> Dict[str, Any]:
    return {
        "N_p": int(mesh.n_cells),
        "vertices": int(mesh.n_vertices),
        "edges": int(mesh.n_edges),
        "interior_edges": int(len(mesh.interior_edges)),
        "boundary_edges": int(len(mesh.boundary_edges)),
        "h": float(mesh_size(mesh)),
        "total_area": float(mesh.total_area),
        "min_area": float(mesh.areas.min()),
        "max_area": float(mesh.areas.max()),
        "triangular": bool(mesh.is_triangular),
    }


class MeshInfoCommand(Command):
    @property
    def name(self) -> str:
        return "mesh_info"

    @property
    def description(self) -> Optional[str]:
        return "Cell, edge and size figures of a mesh"

    @property
    def input_schema(self) -> Dict[str, Any]:
        props = dict(SCENARIO_PROPERTIES)
        props["mesh"] = {"type": "string", "description": "MESH2D file path"}
        return {"type": "object", "properties": props, "additionalProperties": False}

    def execute(self, arguments: Dict[str, Any], context: Any = None) -> Dict[str, Any]:
        if arguments.get("mesh"):
            mesh = read_mesh_file(arguments["mesh"])
        else:
            config = self.scenario_config(arguments)
            mesh = build_scenario_mesh(config, UnitScales.from_spec(config.units))
        summary = mesh_summary(mesh)
        for key, value in summary.items():
            logger.info(f"{key:>15}: {value}")
        return summary


register_command(MeshInfoCommand())
