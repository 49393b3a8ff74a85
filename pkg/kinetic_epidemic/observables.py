"""
Macroscopic diagnostics: domain and regional totals, conservation drift and
reproduction numbers. All integrals are midpoint sums Σ area × value.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from .errors import ArgumentError
from .mesh import Mesh
from .model import (
    CompartmentModel,
    KineticState,
    ParameterFields,
    TotalDensities,
    UrbanState,
    _incidence_E,
    _incidence_I,
)
from .ordinates import OrdinateSet, ordinates

logger = logging.getLogger("KineticEpidemic.Observables")


def integrate(mesh: Mesh, values: np.ndarray, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """Σ area × values over the trailing (cell) axis, optionally restricted to a mask."""
    weights = mesh.areas if mask is None else np.where(mask, mesh.areas, 0.0)
    return np.asarray(values, dtype=float) @ weights


@dataclass(frozen=True, eq=False)
class CompartmentTotals:
    """Per-compartment commuter and urban totals."""

    model: CompartmentModel
    commuters: np.ndarray
    urban: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.commuters + self.urban

    def as_dict(self) -> Dict[str, float]:
        out = {}
        for c, name in enumerate(self.model.compartments):
            out[name] = float(self.commuters[c])
        for c, name in enumerate(self.model.compartments):
            out[f"{name}_u"] = float(self.urban[c])
        return out


def compartment_totals(kinetic: KineticState, urban: UrbanState, mesh: Mesh,
                       model: Optional[CompartmentModel] = None,
                       ordinate_set: Optional[OrdinateSet] = None,
                       mask: Optional[np.ndarray] = None) -> CompartmentTotals:
    """Σ area × density for every compartment, commuters and non-commuters separately."""
    model = model or CompartmentModel("SIR" if urban.values.shape[0] == 3 else "SEIR")
    ordinate_set = ordinate_set or ordinates(kinetic.u.shape[-1])
    commuters = kinetic.densities(ordinate_set)
    return CompartmentTotals(model, integrate(mesh, commuters, mask), integrate(mesh, urban.values, mask))


def region_totals(kinetic: KineticState, urban: UrbanState, mesh: Mesh,
                  regions: Mapping[str, np.ndarray],
                  model: Optional[CompartmentModel] = None,
                  ordinate_set: Optional[OrdinateSet] = None) -> Dict[str, CompartmentTotals]:
    """Totals restricted to each named cell mask; an empty mask gives zeros."""
    out = {}
    for name, mask in regions.items():
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (mesh.n_cells,):
            raise ArgumentError(f"region {name}: mask must have one entry per cell")
        out[name] = compartment_totals(kinetic, urban, mesh, model, ordinate_set, mask)
    return out


def _ratio(numerator: float, denominator: float, what: str) -> Optional[float]:
    if not denominator > 0:
        logger.warning(f"R0 undefined: {what} vanishes")
        return None
    return float(numerator / denominator)


def r0_sir(totals: TotalDensities, fields: ParameterFields, mesh: Mesh) -> Optional[float]:
    """∫F(S_T, I_T) / ∫γ I_T; None when the denominator vanishes."""
    S, I = totals.S_T, totals.I_T
    infections = integrate(mesh, _incidence_I(S, I, fields.beta_I, fields.kappa_I, fields.p))
    recoveries = integrate(mesh, fields.gamma_I * I)
    return _ratio(infections, recoveries, "∫γ I_T")


def r0_seir(totals: TotalDensities, fields: ParameterFields, mesh: Mesh) -> Optional[float]:
    """
    ∫F̃_E/∫(ã+γ̃_E)E_T + [∫F_I/∫(ã+γ̃_E)E_T]·[∫ãE_T/∫γ_I I_T].

    Reduces to r0_sir when σ = ζ = 1.
    """
    S, E, I = totals.S_T, totals.E_T, totals.I_T
    exposed_exit = integrate(mesh, (fields.a_tilde + fields.gamma_E_tilde) * E)
    recoveries = integrate(mesh, fields.gamma_I * I)
    if not exposed_exit > 0 or not recoveries > 0:
        logger.warning("R0 undefined: exposed or infected outflow vanishes")
        return None
    asymptomatic = integrate(mesh, _incidence_E(S, E, fields.beta_E, fields.kappa_E, fields.zeta))
    symptomatic = integrate(mesh, _incidence_I(S, I, fields.beta_I, fields.kappa_I, 1.0))
    progression = integrate(mesh, fields.a_tilde * E)
    return float(asymptomatic / exposed_exit + (symptomatic / exposed_exit) * (progression / recoveries))


def reproduction_number(model: CompartmentModel, totals: TotalDensities, fields: ParameterFields,
                        mesh: Mesh) -> Optional[float]:
    if model.is_seir:
        return r0_seir(totals, fields, mesh)
    return r0_sir(totals, fields, mesh)


def regional_r0_estimate(fields: ParameterFields, totals: TotalDensities, mesh: Mesh) -> Optional[float]:
    """
    Zero-order regional SEIR estimate β̄_I N / mean(ã + γ̃_E).

    N is the domain integral of the total density of every compartment;
    means are area weighted.
    """
    area = mesh.total_area
    population = float(np.sum(integrate(mesh, totals.values)))
    beta = float(integrate(mesh, fields.beta_I)) / area
    exit_rate = float(integrate(mesh, fields.a_tilde + fields.gamma_E_tilde)) / area
    return _ratio(beta * population, exit_rate, "mean exposed exit rate")


def relative_drift(initial: np.ndarray, final: np.ndarray) -> float:
    """|Σfinal − Σinitial| / Σinitial (0 for an empty population)."""
    a = float(np.sum(initial))
    b = float(np.sum(final))
    if a == 0.0:
        return abs(b)
    return abs(b - a) / abs(a)


@dataclass
class TimeSeriesRecord:
    """Diagnostics of one output time."""

    time: float
    totals: CompartmentTotals
    r0: Optional[float] = None
    regions: Dict[str, CompartmentTotals] = field(default_factory=dict)

    @staticmethod
    def header(model: CompartmentModel) -> List[str]:
        names = list(model.compartments)
        return ["t"] + names + [f"{n}_u" for n in names] + ["R0"]

    def row(self) -> List[Optional[float]]:
        return [self.time] + list(self.totals.commuters) + list(self.totals.urban) + [self.r0]

    def region_row(self, name: str) -> List[Optional[float]]:
        t = self.regions[name]
        return [self.time] + list(t.commuters) + list(t.urban)


def record(time: float, model: CompartmentModel, kinetic: KineticState, urban: UrbanState, mesh: Mesh,
           fields: ParameterFields, ordinate_set: OrdinateSet,
           regions: Optional[Mapping[str, np.ndarray]] = None) -> TimeSeriesRecord:
    """Totals, R0 and regional totals of the current state."""
    totals = compartment_totals(kinetic, urban, mesh, model, ordinate_set)
    densities = TotalDensities(kinetic.densities(ordinate_set) + urban.values, model)
    r0 = reproduction_number(model, densities, fields, mesh)
    by_region = region_totals(kinetic, urban, mesh, regions, model, ordinate_set) if regions else {}
    return TimeSeriesRecord(time, totals, r0, by_region)
