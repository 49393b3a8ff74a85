"""Turn a validated ScenarioConfig into a ready-to-run Simulation."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ..errors import ConfigurationError, DomainError
from ..imex import DiffusionLimitStepper, ImexStepper, ImexTableau, MacroState, default_tableau
from ..mesh import Mesh, extract_cells, read_mesh_file, read_polyline, refine_triangles, structured_triangulation
from ..model import CompartmentModel, KineticState, ParameterFields, UrbanState
from ..ordinates import OrdinateSet, ordinates
from .config import ScenarioConfig
from .fields import BuildContext, evaluate_field
from .geometry import disc_mask, nearest_partition, points_in_polygon
from .ingest import City, MobilityMatrix, read_cities, read_mobility
from .initial import commuter_fractions, commuter_split, initial_totals
from .units import UnitScales

logger = logging.getLogger("KineticEpidemic.Scenario")

PER_COMPARTMENT = ("lambda2", "tau", "Du")


@dataclass(eq=False)
class Simulation:
    """Mesh, fields and initial state of one scenario."""

    config: ScenarioConfig
    model: CompartmentModel
    mesh: Mesh
    ordinate_set: OrdinateSet
    fields: ParameterFields
    kinetic: KineticState
    urban: UrbanState
    units: UnitScales = field(default_factory=UnitScales)
    regions: Dict[str, np.ndarray] = field(default_factory=dict)
    cities: List[City] = field(default_factory=list)
    connections: Dict[str, np.ndarray] = field(default_factory=dict)
    mobility: Optional[MobilityMatrix] = None

    def stepper(self, tableau: Optional[ImexTableau] = None) -> ImexStepper:
        m = self.config.model
        return ImexStepper(self.model, self.mesh, self.ordinate_set, self.fields, tableau,
                           flux_source_form=m.flux_source_form,
                           urban_diffusion_argument=m.urban_diffusion_argument,
                           second_order=m.second_order,
                           diffusive_upwinding=m.diffusive_upwinding,
                           positivity_guard=m.positivity_guard)

    def limit_stepper(self, tableau: Optional[ImexTableau] = None) -> DiffusionLimitStepper:
        m = self.config.model
        return DiffusionLimitStepper(self.model, self.mesh, self.ordinate_set, self.fields,
                                     tableau or default_tableau(),
                                     urban_diffusion_argument=m.urban_diffusion_argument,
                                     second_order=m.second_order,
                                     positivity_guard=m.positivity_guard)

    def macro_state(self) -> MacroState:
        return MacroState(self.kinetic.densities(self.ordinate_set), self.urban.values.copy())


def _resolve(path: str, data_dir: Optional[str]) -> Path:
    p = Path(path)
    if p.is_absolute() or data_dir is None:
        return p
    return Path(data_dir) / p


def _load_geography(config: ScenarioConfig):
    geo = config.geography
    cities: List[City] = []
    if geo.cities_file:
        cities.extend(read_cities(_resolve(geo.cities_file, geo.data_dir)))
    cities.extend(City.from_spec(c) for c in geo.cities)
    names = [c.name for c in cities]
    if len(set(names)) != len(names):
        raise ConfigurationError("city names must be unique")
    connections = {}
    for conn in geo.connections:
        if conn.points is not None:
            connections[conn.name] = np.asarray(conn.points, dtype=float)
        else:
            connections[conn.name] = read_polyline(_resolve(conn.path, geo.data_dir))
    mobility = None
    if geo.mobility_file:
        mobility = read_mobility(_resolve(geo.mobility_file, geo.data_dir), names)
    return cities, connections, mobility


def build_scenario_mesh(config: ScenarioConfig, units: UnitScales) -> Mesh:
    spec = config.mesh
    if spec.kind == "rectangle":
        xmin, xmax, ymin, ymax = spec.bounds
        mesh = structured_triangulation(xmin, xmax, ymin, ymax, spec.nx, spec.ny or spec.nx, spec.diagonal)
    elif spec.kind == "file":
        mesh = read_mesh_file(_resolve(spec.path, config.geography.data_dir))
    else:
        boundary = units.scale_length(read_polyline(_resolve(spec.boundary, config.geography.data_dir)))
        spacing = float(units.scale_length(spec.spacing))
        lo, hi = boundary.min(axis=0), boundary.max(axis=0)
        nx = max(1, math.ceil((hi[0] - lo[0]) / spacing))
        ny = max(1, math.ceil((hi[1] - lo[1]) / spacing))
        box = structured_triangulation(lo[0], lo[0] + nx * spacing, lo[1], lo[1] + ny * spacing, nx, ny, spec.diagonal)
        inside = points_in_polygon(box.centroids, boundary)
        if not np.any(inside):
            raise ConfigurationError("no mesh cell lies inside the region boundary")
        mesh = extract_cells(box, inside)
        logger.info(f"Region mesh keeps {mesh.n_cells} of {box.n_cells} cells")
    if spec.refine > 1:
        mesh = refine_triangles(mesh, spec.refine)
    return mesh


def _regions(config: ScenarioConfig, mesh: Mesh, cities: List[City], units: UnitScales) -> Dict[str, np.ndarray]:
    kind = config.geography.regions
    if kind == "none" or not cities:
        return {}
    centers = [units.scale_length(c.center) for c in cities]
    if kind == "voronoi":
        return nearest_partition(mesh.centroids, centers, [c.name for c in cities])
    factor = config.geography.region_radius_factor
    return {c.name: disc_mask(mesh.centroids, center, factor * float(units.scale_length(c.radius)))
            for c, center in zip(cities, centers)}


def _compartment_field(name: str, value, context: BuildContext):
    if isinstance(value, dict):
        return {key: evaluate_field(v, context, f"fields.{name}.{key}") for key, v in value.items()}
    return evaluate_field(value, context, f"fields.{name}")


def _sqrt_field(name: str, value):
    if isinstance(value, dict):
        return {key: _sqrt_field(f"{name}.{key}", v) for key, v in value.items()}
    if np.any(value < 0):
        raise DomainError(f"{name} must be nonnegative")
    return np.sqrt(value)


def build_fields(config: ScenarioConfig, context: BuildContext) -> ParameterFields:
    spec = config.fields
    values = {}
    for name in type(spec).model_fields:
        value = getattr(spec, name)
        if name in PER_COMPARTMENT:
            values[name] = _compartment_field(name, value, context)
        else:
            values[name] = evaluate_field(value, context, f"fields.{name}")
    values["lam"] = _sqrt_field("lambda2", values.pop("lambda2"))
    return ParameterFields.build(context.model, context.mesh.n_cells, **values)


def build_simulation(config: ScenarioConfig) -> Simulation:
    """
    Build the mesh, the region masks, the parameter fields and the split
    initial state of a scenario.
    """
    model = CompartmentModel(config.model.kind)
    units = UnitScales.from_spec(config.units)
    cities, connections, mobility = _load_geography(config)
    mesh = build_scenario_mesh(config, units)
    regions = _regions(config, mesh, cities, units)
    context = BuildContext(mesh, model, units, cities, connections, regions)
    context.totals = initial_totals(config.initial, context)
    fields = build_fields(config, context)
    od = ordinates(config.model.velocity_nodes_per_quadrant)
    kinetic, urban = commuter_split(context.totals, commuter_fractions(config.initial, context), od.n)
    logger.info(
        f"Scenario {config.name}: {model.kind} model, {mesh.n_cells} cells, "
        f"{od.M} velocity directions, {len(regions)} regions"
    )
    return Simulation(config, model, mesh, od, fields, kinetic, urban, units, regions, cities, connections, mobility)
