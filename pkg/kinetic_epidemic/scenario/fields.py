"""
Named builders of per-cell parameter fields.

Each builder is a handler with a JSON-schema `input_schema`; scenario
documents refer to them as {"builder": name, "params": {...}}. Builders
register themselves in `field_builders` at import time.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ..errors import ArgumentError, ConfigurationError
from ..handler_base import BaseHandler, HandlerRegistry
from ..mesh import Mesh
from ..model import CompartmentModel
from .config import FieldSpec
from .geometry import gaussian, polyline_distance
from .ingest import City
from .units import UnitScales

logger = logging.getLogger("KineticEpidemic.Fields")


@dataclass
class BuildContext:
    """Everything a builder may read; coordinates of geography items are raw."""

    mesh: Mesh
    model: CompartmentModel
    units: UnitScales = field(default_factory=UnitScales)
    cities: List[City] = field(default_factory=list)
    connections: Dict[str, np.ndarray] = field(default_factory=dict)
    regions: Dict[str, np.ndarray] = field(default_factory=dict)
    totals: Optional[np.ndarray] = None

    @property
    def points(self) -> np.ndarray:
        return self.mesh.centroids

    def city_center(self, city: City) -> np.ndarray:
        return self.units.scale_length(city.center)

    def city_radius(self, city: City) -> float:
        return float(self.units.scale_length(city.radius))


class FieldBuilder(BaseHandler):
    """A builder returning one value per mesh cell."""

    def execute(self, arguments: Dict[str, Any], context: BuildContext = None) -> np.ndarray:
        return self.build(arguments, context)

    def build(self, arguments: Dict[str, Any], context: BuildContext) -> np.ndarray:
        raise NotImplementedError


field_builders: HandlerRegistry[FieldBuilder] = HandlerRegistry("field builder")


def evaluate_field(value, context: BuildContext, name: str = "field") -> np.ndarray:
    """Scalar or builder spec → (cells,) array."""
    n = context.mesh.n_cells
    if isinstance(value, FieldSpec):
        try:
            builder = field_builders.require(value.builder)
            out = builder.run(dict(value.params), context)
        except ArgumentError as e:
            raise ConfigurationError(f"{name}: {e.message}")
        out = np.broadcast_to(np.asarray(out, dtype=float), (n,)).copy()
    else:
        out = np.full(n, float(value))
    if not np.all(np.isfinite(out)):
        raise ConfigurationError(f"{name}: builder produced non-finite values")
    return out


def _number_list(key: str, length: int) -> Dict[str, Any]:
    return {"type": "array", "items": {"type": "number"}, "minItems": length, "maxItems": length,
            "description": key}


def _point(value, what: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (2,):
        raise ArgumentError(f"{what} must be an [x, y] pair")
    return arr


class ConstantField(FieldBuilder):
    @property
    def name(self) -> str:
        return "constant"

    @property
    def description(self) -> Optional[str]:
        return "The same value in every cell"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {"type": "object", "properties": {"value": {"type": "number"}}, "required": ["value"],
                "additionalProperties": False}

    def build(self, arguments, context):
        return np.full(context.mesh.n_cells, float(arguments["value"]))


class GaussianBumpField(FieldBuilder):
    @property
    def name(self) -> str:
        return "gaussian_bump"

    @property
    def description(self) -> Optional[str]:
        return "offset + amplitude · exp(−rate · |x − center|²)"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "center": _number_list("bump center [x, y]", 2),
                "rate": {"type": "number", "minimum": 0, "default": 1.0},
                "amplitude": {"type": "number", "default": 1.0},
                "offset": {"type": "number", "default": 0.0},
            },
            "required": ["center"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        c = _point(arguments["center"], "center")
        d2 = np.sum((context.points - c) ** 2, axis=1)
        return arguments.get("offset", 0.0) + arguments.get("amplitude", 1.0) * np.exp(-arguments.get("rate", 1.0) * d2)


class SineProductField(FieldBuilder):
    @property
    def name(self) -> str:
        return "sine_product"

    @property
    def description(self) -> Optional[str]:
        return "offset + amplitude · sin(kx · x) · sin(ky · y)"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "kx": {"type": "number"},
                "ky": {"type": "number"},
                "amplitude": {"type": "number", "default": 1.0},
                "offset": {"type": "number", "default": 0.0},
            },
            "required": ["kx", "ky"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        x, y = context.points[:, 0], context.points[:, 1]
        wave = np.sin(arguments["kx"] * x) * np.sin(arguments["ky"] * y)
        return arguments.get("offset", 0.0) + arguments.get("amplitude", 1.0) * wave


class ParaboloidCapsField(FieldBuilder):
    @property
    def name(self) -> str:
        return "paraboloid_caps"

    @property
    def description(self) -> Optional[str]:
        return "Σ max(0, height − curvature · |x − center|²) over the listed caps"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "caps": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "center": _number_list("cap center [x, y]", 2),
                            "curvature": {"type": "number", "minimum": 0},
                            "height": {"type": "number", "default": 1.0},
                        },
                        "required": ["center", "curvature"],
                    },
                }
            },
            "required": ["caps"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        out = np.zeros(context.mesh.n_cells)
        for cap in arguments["caps"]:
            c = _point(cap["center"], "cap center")
            d2 = np.sum((context.points - c) ** 2, axis=1)
            out += np.maximum(0.0, cap.get("height", 1.0) - cap["curvature"] * d2)
        return out


class PopulationIndicatorField(FieldBuilder):
    @property
    def name(self) -> str:
        return "population_indicator"

    @property
    def description(self) -> Optional[str]:
        return "`inside` where the summed initial totals of the listed compartments are positive, else `outside`"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "inside": {"type": "number"},
                "outside": {"type": "number", "default": 0.0},
                "compartments": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["inside"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        if context.totals is None:
            raise ArgumentError("population_indicator needs the initial totals")
        names = arguments.get("compartments") or list(context.model.compartments)
        population = sum(context.totals[context.model.index(n)] for n in names)
        return np.where(population > 0.0, float(arguments["inside"]), float(arguments.get("outside", 0.0)))


def _band_threshold(mesh: Mesh, half_width: float, cell_fraction: float) -> np.ndarray:
    return np.maximum(half_width, cell_fraction * mesh.diameters)


class PathBandsField(FieldBuilder):
    @property
    def name(self) -> str:
        return "path_bands"

    @property
    def description(self) -> Optional[str]:
        return "Per-path values on bands around polylines (largest value wins), background elsewhere"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "paths": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {
                            "points": {"type": "array", "items": _number_list("vertex [x, y]", 2)},
                            "value": {"type": "number"},
                        },
                        "required": ["points", "value"],
                    },
                },
                "half_width": {"type": "number", "minimum": 0},
                "background": {"type": "number", "default": 0.0},
                "min_cell_fraction": {"type": "number", "minimum": 0, "default": 0.5},
            },
            "required": ["paths", "half_width"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        threshold = _band_threshold(context.mesh, arguments["half_width"], arguments.get("min_cell_fraction", 0.5))
        out = np.full(context.mesh.n_cells, -np.inf)
        for path in arguments["paths"]:
            on_band = polyline_distance(context.points, np.asarray(path["points"], dtype=float)) <= threshold
            out = np.where(on_band, np.maximum(out, float(path["value"])), out)
        return np.where(np.isinf(out), float(arguments.get("background", 0.0)), out)


class ConnectionBandsField(FieldBuilder):
    @property
    def name(self) -> str:
        return "connection_bands"

    @property
    def description(self) -> Optional[str]:
        return "`value` on bands around the scenario's named connections, background elsewhere"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "value": {"type": "number"},
                "background": {"type": "number", "default": 0.0},
                "half_width": {"type": "number", "minimum": 0, "description": "raw length units"},
                "connections": {"type": "array", "items": {"type": "string"}},
                "min_cell_fraction": {"type": "number", "minimum": 0, "default": 0.5},
            },
            "required": ["value", "half_width"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        names = arguments.get("connections") or sorted(context.connections)
        if not names:
            raise ArgumentError("connection_bands needs connections in the scenario geography")
        half_width = float(context.units.scale_length(arguments["half_width"]))
        threshold = _band_threshold(context.mesh, half_width, arguments.get("min_cell_fraction", 0.5))
        on_band = np.zeros(context.mesh.n_cells, dtype=bool)
        for name in names:
            if name not in context.connections:
                raise ArgumentError(f"unknown connection {name!r}")
            line = context.units.scale_length(context.connections[name])
            on_band |= polyline_distance(context.points, line) <= threshold
        logger.debug(f"Connection bands cover {int(on_band.sum())} of {context.mesh.n_cells} cells")
        return np.where(on_band, float(arguments["value"]), float(arguments.get("background", 0.0)))


class CityRelaxationField(FieldBuilder):
    @property
    def name(self) -> str:
        return "city_relaxation"

    @property
    def description(self) -> Optional[str]:
        return "max(τ0, τ_r + (τ0 − τ_r) Σ_c exp(−½ d_c²/r_c²)) over the scenario cities"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "tau_r": {"type": "number", "minimum": 0},
                "tau_0": {"type": "number", "minimum": 0},
            },
            "required": ["tau_r", "tau_0"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        if not context.cities:
            raise ArgumentError("city_relaxation needs cities in the scenario geography")
        tau_r, tau_0 = float(arguments["tau_r"]), float(arguments["tau_0"])
        weight = sum(gaussian(context.points, context.city_center(c), context.city_radius(c)) for c in context.cities)
        return np.maximum(tau_0, tau_r + (tau_0 - tau_r) * weight)


class HubRelaxationField(FieldBuilder):
    @property
    def name(self) -> str:
        return "hub_relaxation"

    @property
    def description(self) -> Optional[str]:
        return "max(τ0, τ_r − factor · τ̃), τ̃ = τ_r Σ_h exp(−½ d_h²/s_h²)"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "tau_r": {"type": "number", "minimum": 0},
                "tau_0": {"type": "number", "minimum": 0},
                "factor": {"type": "number", "default": 1.5},
                "hubs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "properties": {"center": _number_list("hub center [x, y]", 2),
                                       "width": {"type": "number", "minimum": 0}},
                        "required": ["center", "width"],
                    },
                },
            },
            "required": ["tau_r", "tau_0", "hubs"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        tau_r, tau_0 = float(arguments["tau_r"]), float(arguments["tau_0"])
        weight = np.zeros(context.mesh.n_cells)
        for hub in arguments["hubs"]:
            weight += gaussian(context.points, _point(hub["center"], "hub center"), float(hub["width"]))
        return np.maximum(tau_0, tau_r - arguments.get("factor", 1.5) * tau_r * weight)


class CityAttributeField(FieldBuilder):
    @property
    def name(self) -> str:
        return "city_attribute"

    @property
    def description(self) -> Optional[str]:
        return "Per-region value of a city attribute (regions keyed by city name)"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "attribute": {"type": "string", "enum": ["commuter_fraction", "radius"]},
                "default": {"type": "number", "default": 0.0},
            },
            "required": ["attribute"],
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        if not context.regions:
            raise ArgumentError("city_attribute needs region masks")
        out = np.full(context.mesh.n_cells, float(arguments.get("default", 0.0)))
        for city in context.cities:
            mask = context.regions.get(city.name)
            if mask is None:
                raise ArgumentError(f"no region for city {city.name!r}")
            out[mask] = float(getattr(city, arguments["attribute"]))
        return out


class TabulatedField(FieldBuilder):
    @property
    def name(self) -> str:
        return "tabulated"

    @property
    def description(self) -> Optional[str]:
        return "Explicit per-cell values"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {"type": "object", "properties": {"values": {"type": "array", "items": {"type": "number"}}},
                "required": ["values"], "additionalProperties": False}

    def build(self, arguments, context):
        values = np.asarray(arguments["values"], dtype=float)
        if values.shape != (context.mesh.n_cells,):
            raise ArgumentError(f"tabulated field needs {context.mesh.n_cells} values, got {values.size}")
        return values


for _builder in (ConstantField(), GaussianBumpField(), SineProductField(), ParaboloidCapsField(),
                 PopulationIndicatorField(), PathBandsField(), ConnectionBandsField(), CityRelaxationField(),
                 HubRelaxationField(), CityAttributeField(), TabulatedField()):
    field_builders.register(_builder)
