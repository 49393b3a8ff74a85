"""
Legacy ASCII VTK unstructured-grid snapshots.

Floats are written with repr() (shortest round-trip form) and nothing
time-dependent goes into the body, so identical inputs give identical bytes.
"""

import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..mesh import Mesh
from ..model import CompartmentModel, KineticState, ParameterFields, UrbanState
from ..ordinates import OrdinateSet

logger = logging.getLogger("KineticEpidemic.IO")

VTK_TRIANGLE = 5
VTK_QUAD = 9
VTK_POLYGON = 7


def _cell_type(n_vertices: int) -> int:
    return {3: VTK_TRIANGLE, 4: VTK_QUAD}.get(n_vertices, VTK_POLYGON)


def snapshot_arrays(model: CompartmentModel, kinetic: KineticState, urban: UrbanState,
                    ordinate_set: OrdinateSet, fields: Optional[ParameterFields] = None) -> Dict[str, np.ndarray]:
    """Commuter, urban and total density per compartment, plus λ² and τ."""
    commuters = kinetic.densities(ordinate_set)
    arrays: Dict[str, np.ndarray] = {}
    for c, name in enumerate(model.compartments):
        arrays[f"{name}_commuter"] = commuters[c]
        arrays[f"{name}_urban"] = urban.values[c]
        arrays[f"{name}_total"] = commuters[c] + urban.values[c]
    if fields is not None:
        for c, name in enumerate(model.compartments):
            arrays[f"lambda2_{name}"] = fields.lambda2[c]
            arrays[f"tau_{name}"] = fields.tau[c]
    return arrays


def write_vtk(mesh: Mesh, cell_data: Dict[str, np.ndarray], path: Union[str, Path],
              title: str = "kinetic epidemic snapshot") -> Path:
    path = Path(path)
    lines: List[str] = [
        "# vtk DataFile Version 2.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines.extend(f"{float(x)!r} {float(y)!r} 0.0" for x, y in mesh.vertices)
    size = sum(len(ids) + 1 for ids in mesh.cell_vertices)
    lines.append(f"CELLS {mesh.n_cells} {size}")
    lines.extend(f"{len(ids)} " + " ".join(str(int(v)) for v in ids) for ids in mesh.cell_vertices)
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines.extend(str(_cell_type(len(ids))) for ids in mesh.cell_vertices)
    if cell_data:
        lines.append(f"CELL_DATA {mesh.n_cells}")
        for name, values in cell_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (mesh.n_cells,):
                raise ValueError(f"cell array {name} has shape {values.shape}, expected ({mesh.n_cells},)")
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(repr(float(v)) for v in values)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    logger.debug(f"Wrote VTK snapshot {path}")
    return path


def write_vtk_snapshot(model: CompartmentModel, kinetic: KineticState, urban: UrbanState, mesh: Mesh,
                       path: Union[str, Path], ordinate_set: OrdinateSet,
                       fields: Optional[ParameterFields] = None, title: str = "kinetic epidemic snapshot") -> Path:
    return write_vtk(mesh, snapshot_arrays(model, kinetic, urban, ordinate_set, fields), path, title)
