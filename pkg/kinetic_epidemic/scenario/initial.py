"""
Initial conditions: city Gaussians, named initial-condition builders and
the commuter / non-commuter split.
"""

import logging
from typing import Any, Dict, Optional

import numpy as np

from ..errors import ArgumentError, ConfigurationError, DomainError
from ..handler_base import BaseHandler, HandlerRegistry
from ..mesh import Mesh, locate_cell
from ..model import KineticState, UrbanState
from ..observables import integrate
from .config import InitialSpec
from .fields import BuildContext, evaluate_field
from .geometry import gaussian
from .ingest import City

logger = logging.getLogger("KineticEpidemic.Initial")


def gaussian_city_ic(city: City, quantity: float, mesh: Mesh, length_scale: float = 1.0) -> np.ndarray:
    """
    Per-cell density of a Gaussian of width r_c around the city center,
    renormalized so that its integral over the mesh equals `quantity`.

    A city too narrow for the mesh puts everything in the cell holding its
    center (or the nearest cell when the center is outside the domain).
    """
    if not city.radius > 0:
        raise ArgumentError(f"city {city.name}: radius must be positive")
    if quantity < 0:
        raise ArgumentError(f"city {city.name}: quantity must be nonnegative")
    out = np.zeros(mesh.n_cells)
    if quantity == 0:
        return out
    center = np.asarray(city.center, dtype=float) * length_scale
    radius = city.radius * length_scale
    shape = gaussian(mesh.centroids, center, radius) / (2.0 * np.pi * radius ** 2)
    mass = float(integrate(mesh, shape))
    if mass > 0.0:
        return shape * (quantity / mass)
    k = locate_cell(mesh, center)
    if k is None:
        k = int(np.argmin(np.linalg.norm(mesh.centroids - center, axis=1)))
    logger.warning(f"City {city.name} is narrower than the mesh, placing it in cell {k}")
    out[k] = quantity / mesh.areas[k]
    return out


def commuter_split(totals: np.ndarray, fractions, n_nodes: int):
    """
    Split total densities (C, K) into an isotropic commuter state holding
    `fractions` of each total and the non-commuter remainder.
    """
    totals = np.asarray(totals, dtype=float)
    try:
        f = np.broadcast_to(np.asarray(fractions, dtype=float), totals.shape)
    except ValueError:
        raise ArgumentError(f"commuter fractions do not broadcast to {totals.shape}")
    if np.any(f < 0.0) or np.any(f > 1.0) or not np.all(np.isfinite(f)):
        raise ArgumentError("commuter fractions must lie in [0, 1]")
    commuters = f * totals
    return KineticState.isotropic(commuters, n_nodes), UrbanState(totals - commuters)


class InitialBuilder(BaseHandler):
    """A builder returning {compartment: (cells,) total density}."""

    def execute(self, arguments: Dict[str, Any], context: BuildContext = None) -> Dict[str, np.ndarray]:
        return self.build(arguments, context)

    def build(self, arguments: Dict[str, Any], context: BuildContext) -> Dict[str, np.ndarray]:
        raise NotImplementedError


initial_builders: HandlerRegistry[InitialBuilder] = HandlerRegistry("initial-condition builder")


class CityGaussians(InitialBuilder):
    @property
    def name(self) -> str:
        return "city_gaussians"

    @property
    def description(self) -> Optional[str]:
        return "Susceptible, exposed and infected city populations spread as normalized Gaussians"

    @property
    def input_schema(self) -> Dict[str, Any]:
        return {
            "type": "object",
            "properties": {
                "exposed_per_infected": {
                    "type": "number", "minimum": 0,
                    "description": "when given, E_T = factor × I_T replaces the city exposed counts",
                },
            },
            "additionalProperties": False,
        }

    def build(self, arguments, context):
        if not context.cities:
            raise ArgumentError("city_gaussians needs cities in the scenario geography")
        model = context.model
        factor = arguments.get("exposed_per_infected")
        out = {name: np.zeros(context.mesh.n_cells) for name in model.compartments}
        for city in context.cities:
            exposed = city.exposed if factor is None else factor * city.infected
            if not model.is_seir:
                exposed = 0.0
            susceptible = city.population - city.infected - exposed
            if susceptible < 0:
                raise DomainError(f"city {city.name}: infected and exposed exceed the population")
            for name, amount in (("S", susceptible), ("I", city.infected), ("E", exposed)):
                if name in out and amount > 0:
                    scaled = float(context.units.scale_population(amount))
                    out[name] += gaussian_city_ic(city, scaled, context.mesh, context.units.length)
        return out


for _builder in (CityGaussians(),):
    initial_builders.register(_builder)


def initial_totals(spec: InitialSpec, context: BuildContext) -> np.ndarray:
    """Total densities (C, K) from explicit per-compartment fields or a builder."""
    model = context.model
    n = context.mesh.n_cells
    totals = np.zeros((model.n_compartments, n))
    if spec.builder is not None:
        try:
            builder = initial_builders.require(spec.builder.builder)
            values = builder.run(dict(spec.builder.params), context)
        except ArgumentError as e:
            raise ConfigurationError(f"initial: {e.message}")
        for name, arr in values.items():
            totals[model.index(name)] = arr
    else:
        for name, value in spec.totals.items():
            totals[model.index(name)] = evaluate_field(value, context, f"initial.totals.{name}")
    if not np.all(np.isfinite(totals)):
        raise ConfigurationError("initial totals are not finite")
    if spec.require_nonnegative and np.any(totals < 0):
        raise DomainError("initial totals must be nonnegative")
    logger.debug(f"Initial population {float(np.sum(integrate(context.mesh, totals)))!r}")
    return totals


def commuter_fractions(spec: InitialSpec, context: BuildContext) -> np.ndarray:
    """Commuter fraction per compartment and cell, (C, K)."""
    model = context.model
    value = spec.commuter_fraction
    if isinstance(value, dict):
        default = value.get("*", 1.0)
        rows = [evaluate_field(value.get(name, default), context, f"initial.commuter_fraction.{name}")
                for name in model.compartments]
        return np.stack(rows)
    row = evaluate_field(value, context, "initial.commuter_fraction")
    return np.repeat(row[None, :], model.n_compartments, axis=0)
