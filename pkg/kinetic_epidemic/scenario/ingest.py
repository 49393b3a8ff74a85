"""
Readers of the shipped scenario data.

    cities CSV    name,x,y,r_km,P,I0,E0,C   (C the commuter fraction in [0, 1])
    mobility CSV  origin,destination,count
    polylines     one 'x y' pair per line
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from ..errors import IngestionError
from ..mesh import read_polyline
from .config import CitySpec

logger = logging.getLogger("KineticEpidemic.Scenario")

CITY_COLUMNS = ("name", "x", "y", "r_km", "P", "I0", "E0", "C")
MOBILITY_COLUMNS = ("origin", "destination", "count")


@dataclass(frozen=True)
class City:
    """A city in raw units (km, persons); commuter_fraction in [0, 1]."""

    name: str
    center: Tuple[float, float]
    radius: float
    population: float
    infected: float
    exposed: float
    commuter_fraction: float

    @property
    def susceptible(self) -> float:
        return self.population - self.infected - self.exposed

    @classmethod
    def from_spec(cls, spec: CitySpec) -> "City":
        city = cls(spec.name, tuple(spec.center), spec.radius, spec.population, spec.infected, spec.exposed,
                   spec.commuter_fraction)
        problem = city.problem()
        if problem:
            raise IngestionError(f"city {spec.name}: {problem}")
        return city

    def problem(self):
        if not self.radius > 0:
            return "radius must be positive"
        if not 0.0 <= self.commuter_fraction <= 1.0:
            return "commuter fraction must lie in [0, 1]"
        if self.infected < 0 or self.exposed < 0:
            return "infected and exposed counts must be nonnegative"
        if self.population < self.infected + self.exposed:
            return "population must be at least infected + exposed"
        return None


def _open_csv(path: Path, columns: Sequence[str]):
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as e:
        raise IngestionError(f"cannot read table: {e}", path=str(path))
    reader = csv.DictReader(handle)
    header = [h.strip() for h in (reader.fieldnames or [])]
    missing = [c for c in columns if c not in header]
    if missing:
        handle.close()
        raise IngestionError(f"missing column(s) {', '.join(missing)}", path=str(path), line=1)
    reader.fieldnames = header
    return handle, reader


def read_cities(path: Union[str, Path]) -> List[City]:
    path = Path(path)
    handle, reader = _open_csv(path, CITY_COLUMNS)
    cities = []
    with handle:
        for row in reader:
            line = reader.line_num
            try:
                city = City(
                    name=row["name"].strip(),
                    center=(float(row["x"]), float(row["y"])),
                    radius=float(row["r_km"]),
                    population=float(row["P"]),
                    infected=float(row["I0"]),
                    exposed=float(row["E0"]),
                    commuter_fraction=float(row["C"]),
                )
            except (AttributeError, TypeError, ValueError):
                raise IngestionError("malformed city row", path=str(path), line=line)
            problem = city.problem()
            if problem:
                raise IngestionError(f"city {city.name}: {problem}", path=str(path), line=line)
            cities.append(city)
    if not cities:
        raise IngestionError("city table is empty", path=str(path))
    logger.debug(f"Read {len(cities)} cities from {path}")
    return cities


@dataclass(frozen=True, eq=False)
class MobilityMatrix:
    """Origin → destination commuter counts (persons/day)."""

    names: Tuple[str, ...]
    counts: np.ndarray

    def outgoing(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def commuter_percentages(self, populations: Sequence[float]) -> np.ndarray:
        """Outgoing commuters over the origin population, in percent."""
        pop = np.asarray(populations, dtype=float)
        return 100.0 * self.outgoing() / pop


def read_mobility(path: Union[str, Path], names: Sequence[str]) -> MobilityMatrix:
    """Counts between the given names; pairs not listed are zero."""
    path = Path(path)
    index: Dict[str, int] = {n: i for i, n in enumerate(names)}
    counts = np.zeros((len(names), len(names)))
    handle, reader = _open_csv(path, MOBILITY_COLUMNS)
    with handle:
        for row in reader:
            line = reader.line_num
            origin, destination = (row["origin"] or "").strip(), (row["destination"] or "").strip()
            if origin not in index or destination not in index:
                raise IngestionError(f"unknown province {origin if origin not in index else destination!r}",
                                     path=str(path), line=line)
            try:
                count = float(row["count"])
            except (TypeError, ValueError):
                raise IngestionError("malformed commuter count", path=str(path), line=line)
            if count < 0:
                raise IngestionError("commuter counts must be nonnegative", path=str(path), line=line)
            if origin == destination:
                raise IngestionError("the mobility matrix has a zero diagonal", path=str(path), line=line)
            counts[index[origin], index[destination]] = count
    return MobilityMatrix(tuple(names), counts)


def read_connection(path: Union[str, Path]) -> np.ndarray:
    return read_polyline(path)


def load_connections(directory: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Every *.txt polyline of a directory, keyed by file stem."""
    directory = Path(directory)
    if not directory.is_dir():
        raise IngestionError("connection directory not found", path=str(directory))
    out = {p.stem: read_polyline(p) for p in sorted(directory.glob("*.txt"))}
    if not out:
        raise IngestionError("no connection polylines found", path=str(directory))
    return out
