"""
Scenario documents.

A scenario is a JSON document validated by the models below. Analytic
fields are named builders with numeric parameters; see scenario.fields and
scenario.initial for the registered builders.
"""

import copy
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..errors import ArgumentError, ConfigurationError, IngestionError
from ..ordinates import DEFAULT_NODES, MAX_NODES

logger = logging.getLogger("KineticEpidemic.Scenario")


class _Spec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class FieldSpec(_Spec):
    """A named field builder and its parameters."""

    builder: str
    params: Dict[str, Any] = Field(default_factory=dict)


FieldValue = Union[float, FieldSpec]
CompartmentFieldValue = Union[float, FieldSpec, Dict[str, FieldValue]]


class MeshSpec(_Spec):
    """
    rectangle: structured triangulation of `bounds` with nx × ny squares
    file:      MESH2D text file at `path`
    region:    structured triangulation of the boundary polygon's bounding
               box, keeping cells whose centroid lies inside `boundary`
    """

    kind: Literal["rectangle", "file", "region"] = "rectangle"
    bounds: Tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    nx: int = Field(default=16, ge=1)
    ny: Optional[int] = Field(default=None, ge=1)
    diagonal: Literal["right", "left", "alternate"] = "right"
    path: Optional[str] = None
    boundary: Optional[str] = None
    spacing: Optional[float] = Field(default=None, gt=0)
    refine: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_source(self):
        if self.kind == "file" and not self.path:
            raise ValueError("mesh kind 'file' needs a path")
        if self.kind == "region" and (not self.boundary or self.spacing is None):
            raise ValueError("mesh kind 'region' needs a boundary polyline and a spacing")
        xmin, xmax, ymin, ymax = self.bounds
        if self.kind == "rectangle" and not (xmax > xmin and ymax > ymin):
            raise ValueError("mesh bounds must satisfy xmin < xmax and ymin < ymax")
        return self


class ModelSpec(_Spec):
    kind: Literal["SIR", "SEIR"] = "SIR"
    velocity_nodes_per_quadrant: int = Field(default=DEFAULT_NODES, ge=1, le=MAX_NODES)
    flux_source_form: Literal["appendix", "moment"] = "appendix"
    urban_diffusion_argument: Literal["urban", "commuter"] = "urban"
    second_order: bool = True
    diffusive_upwinding: bool = True
    positivity_guard: bool = True


class FieldsSpec(_Spec):
    """
    Parameter fields. lambda2 (λ²), tau and Du accept a per-compartment
    mapping, with "*" as the default entry.
    """

    beta_I: FieldValue = 0.0
    kappa_I: FieldValue = 0.0
    p: FieldValue = 1.0
    gamma_I: FieldValue = 0.0
    lambda2: CompartmentFieldValue = 0.0
    tau: CompartmentFieldValue = 1.0
    Du: CompartmentFieldValue = 0.0
    beta_E: FieldValue = 0.0
    kappa_E: FieldValue = 0.0
    sigma: FieldValue = 1.0
    zeta: FieldValue = 1.0
    a: FieldValue = 0.0
    gamma_E: FieldValue = 0.0


class InitialSpec(_Spec):
    """
    Initial total densities per compartment (missing compartments are zero)
    or a named initial-condition builder, plus the commuter fraction rule.
    """

    totals: Dict[str, FieldValue] = Field(default_factory=dict)
    builder: Optional[FieldSpec] = None
    commuter_fraction: CompartmentFieldValue = 1.0
    require_nonnegative: bool = True

    @model_validator(mode="after")
    def _one_source(self):
        if self.builder is not None and self.totals:
            raise ValueError("give either initial totals or an initial-condition builder, not both")
        return self


class TimeSpec(_Spec):
    t_end: float = Field(gt=0)
    cfl: float = Field(default=0.9, gt=0, le=1)
    dt_max: Optional[float] = Field(default=None, gt=0)
    output_every: Optional[float] = Field(default=None, gt=0)
    snapshot_every: int = Field(default=0, ge=0)

    @property
    def dt_limit(self) -> float:
        return math.inf if self.dt_max is None else self.dt_max


class UnitsSpec(_Spec):
    """Raw inputs are multiplied by these scales (1 km = length L, 1 person = population P)."""

    length: float = Field(default=1.0, gt=0)
    population: float = Field(default=1.0, gt=0)
    days_per_time_unit: float = Field(default=1.0, gt=0)


class CitySpec(_Spec):
    name: str
    center: Tuple[float, float]
    radius: float = Field(gt=0)
    population: float = Field(default=0.0, ge=0)
    infected: float = Field(default=0.0, ge=0)
    exposed: float = Field(default=0.0, ge=0)
    commuter_fraction: float = Field(default=0.0, ge=0, le=1)


class ConnectionSpec(_Spec):
    """A path as a polyline of raw coordinates, or a file of 'x y' lines."""

    name: str
    points: Optional[List[Tuple[float, float]]] = None
    path: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.points is None) == (self.path is None):
            raise ValueError(f"connection {self.name}: give exactly one of points or path")
        if self.points is not None and len(self.points) < 2:
            raise ValueError(f"connection {self.name}: needs at least two points")
        return self


class GeographySpec(_Spec):
    """
    Cities and connections in raw coordinates; files are resolved against
    data_dir. regions: "voronoi" partitions the mesh by nearest city,
    "discs" uses a disc of region_radius_factor × radius per city.
    """

    data_dir: Optional[str] = None
    cities_file: Optional[str] = None
    mobility_file: Optional[str] = None
    cities: List[CitySpec] = Field(default_factory=list)
    connections: List[ConnectionSpec] = Field(default_factory=list)
    regions: Literal["none", "voronoi", "discs"] = "none"
    region_radius_factor: float = Field(default=3.0, gt=0)


class OutputSpec(_Spec):
    directory: Optional[str] = None
    timeseries: bool = True
    regions: bool = True
    snapshots: bool = False


class ScenarioConfig(_Spec):
    name: str = "scenario"
    mesh: MeshSpec = Field(default_factory=MeshSpec)
    model: ModelSpec = Field(default_factory=ModelSpec)
    fields: FieldsSpec = Field(default_factory=FieldsSpec)
    initial: InitialSpec = Field(default_factory=InitialSpec)
    time: TimeSpec
    units: UnitsSpec = Field(default_factory=UnitsSpec)
    geography: GeographySpec = Field(default_factory=GeographySpec)
    output: OutputSpec = Field(default_factory=OutputSpec)

    @field_validator("name")
    @classmethod
    def _name(cls, value: str) -> str:
        if not value or any(ch in value for ch in "/\\"):
            raise ValueError("scenario name must be a non-empty file-name-safe string")
        return value

    @model_validator(mode="after")
    def _model_fields(self):
        compartments = ("S", "I", "R") if self.model.kind == "SIR" else ("S", "E", "I", "R")
        for key in self.initial.totals:
            if key not in compartments:
                raise ValueError(f"initial total for unknown compartment {key!r} in a {self.model.kind} model")
        for name in ("lambda2", "tau", "Du"):
            value = getattr(self.fields, name)
            if isinstance(value, dict):
                unknown = set(value) - set(compartments) - {"*"}
                if unknown:
                    raise ValueError(f"fields.{name}: unknown compartment(s) {sorted(unknown)}")
        if self.model.kind == "SEIR" and isinstance(self.fields.p, (int, float)) and self.fields.p != 1.0:
            raise ValueError("the SEIR model uses the bilinear incidence exponent p = 1")
        return self


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err.get("loc", ()))
        parts.append(f"{loc}: {err.get('msg')}" if loc else str(err.get("msg")))
    return "; ".join(parts)


def validate_config(document: Dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigurationError(f"invalid scenario: {_format_validation_error(e)}")


def _parse_override(item: str) -> Tuple[List[str], Any]:
    if "=" not in item:
        raise ArgumentError(f"override must look like key.path=value, got {item!r}")
    key, raw = item.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ArgumentError(f"empty override key in {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(document: Dict[str, Any], overrides: List[str]) -> Dict[str, Any]:
    """Apply dotted-path `key=value` overrides (values parsed as JSON when possible)."""
    doc = copy.deepcopy(document)
    for item in overrides or []:
        path, value = _parse_override(item)
        node = doc
        for key in path[:-1]:
            child = node.get(key)
            if child is None:
                child = node[key] = {}
            elif not isinstance(child, dict):
                raise ArgumentError(f"override {item!r}: {key} is not a section")
            node = child
        node[path[-1]] = value
        logger.debug(f"Override {'.'.join(path)} = {value!r}")
    return doc


def load_scenario(path: Union[str, Path], overrides: Optional[List[str]] = None) -> ScenarioConfig:
    """Read a scenario JSON file, apply overrides and validate."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise IngestionError(f"cannot read scenario: {e}", path=str(path))
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise IngestionError(f"scenario is not valid JSON: {e.msg}", path=str(path), line=e.lineno)
    if not isinstance(document, dict):
        raise IngestionError("scenario document must be a JSON object", path=str(path))
    geography = document.get("geography")
    if isinstance(geography, dict) and geography.get("data_dir"):
        data_dir = Path(geography["data_dir"])
        if not data_dir.is_absolute():
            geography["data_dir"] = str((path.parent / data_dir).resolve())
    return validate_config(apply_overrides(document, overrides or []))


def config_with_overrides(config: ScenarioConfig, overrides: List[str]) -> ScenarioConfig:
    if not overrides:
        return config
    return validate_config(apply_overrides(config.model_dump(mode="json"), overrides))


def dump_scenario(config: ScenarioConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")
    return path
