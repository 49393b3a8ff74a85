"""Rescaling between raw inputs (km, persons, days) and solver units."""

from dataclasses import dataclass

import numpy as np

from .config import UnitsSpec


@dataclass(frozen=True)
class UnitScales:
    length: float = 1.0
    population: float = 1.0
    days_per_time_unit: float = 1.0

    @classmethod
    def from_spec(cls, spec: UnitsSpec) -> "UnitScales":
        return cls(spec.length, spec.population, spec.days_per_time_unit)

    def scale_length(self, values):
        return np.asarray(values, dtype=float) * self.length

    def unscale_length(self, values):
        return np.asarray(values, dtype=float) / self.length

    def scale_population(self, values):
        return np.asarray(values, dtype=float) * self.population

    def unscale_population(self, values):
        return np.asarray(values, dtype=float) / self.population

    def days_to_time(self, days):
        return np.asarray(days, dtype=float) / self.days_per_time_unit

    def time_to_days(self, t):
        return np.asarray(t, dtype=float) * self.days_per_time_unit
