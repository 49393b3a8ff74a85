"""Output writers: CSV time series, VTK snapshots and the run report."""

from .report import RunReport, read_report
from .timeseries import TimeSeriesWriter, format_number, read_timeseries
from .vtk import snapshot_arrays, write_vtk, write_vtk_snapshot

__all__ = [
    "RunReport",
    "TimeSeriesWriter",
    "format_number",
    "read_report",
    "read_timeseries",
    "snapshot_arrays",
    "write_vtk",
    "write_vtk_snapshot",
]
