"""
CSV time series: `timeseries.csv` for the whole domain and
`regions/<name>.csv` per region mask.

Numbers use the shortest round-trip decimal form; an undefined R0 is an
empty field.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from ..model import CompartmentModel
from ..observables import TimeSeriesRecord

logger = logging.getLogger("KineticEpidemic.IO")


def format_number(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _safe_name(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


class TimeSeriesWriter:
    """Writes one row per output time; files stay open until close()."""

    def __init__(self, directory: Union[str, Path], model: CompartmentModel,
                 regions: Sequence[str] = (), write_regions: bool = True):
        self.directory = Path(directory)
        self.model = model
        self.directory.mkdir(parents=True, exist_ok=True)
        self.paths: List[Path] = []
        self._files = []
        self._main = self._open(self.directory / "timeseries.csv", TimeSeriesRecord.header(model))
        self._regions: Dict[str, "csv.writer"] = {}
        if write_regions and regions:
            region_dir = self.directory / "regions"
            region_dir.mkdir(exist_ok=True)
            header = TimeSeriesRecord.header(model)[:-1]
            for name in regions:
                self._regions[name] = self._open(region_dir / f"{_safe_name(name)}.csv", header)

    def _open(self, path: Path, header: List[str]):
        handle = open(path, "w", newline="", encoding="utf-8")
        self._files.append(handle)
        self.paths.append(path)
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        return writer

    def write(self, record: TimeSeriesRecord) -> None:
        self._main.writerow([format_number(v) for v in record.row()])
        for name, writer in self._regions.items():
            writer.writerow([format_number(v) for v in record.region_row(name)])

    def close(self) -> None:
        for handle in self._files:
            handle.close()
        self._files = []

    def __enter__(self) -> "TimeSeriesWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def read_timeseries(path: Union[str, Path]) -> Dict[str, List[Optional[float]]]:
    """Columns of a time-series CSV keyed by header name."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        columns: Dict[str, List[Optional[float]]] = {h: [] for h in header}
        for row in reader:
            for h, cell in zip(header, row):
                columns[h].append(float(cell) if cell != "" else None)
    return columns
