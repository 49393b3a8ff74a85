"""
Time loop of one scenario run: CFL step, IMEX step, outputs at cadence and
the run report.
"""

import logging
import time as wall_clock
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ..imex import ImexTableau, TimeController, cfl_dt
from ..io.report import RunReport
from ..io.timeseries import TimeSeriesWriter
from ..io.vtk import write_vtk_snapshot
from ..model import KineticState, TotalDensities, UrbanState
from ..observables import TimeSeriesRecord, compartment_totals, record, regional_r0_estimate, relative_drift
from ..scenario.build import Simulation

logger = logging.getLogger("KineticEpidemic.Runner")


@dataclass
class RunResult:
    report: RunReport
    kinetic: KineticState
    urban: UrbanState
    records: List[TimeSeriesRecord] = field(default_factory=list)


class _Outputs:
    """Time series and snapshot files of one run (all optional)."""

    def __init__(self, sim: Simulation, directory: Optional[Path]):
        self.sim = sim
        self.directory = directory
        out = sim.config.output
        self.writer = None
        if directory is not None and out.timeseries:
            self.writer = TimeSeriesWriter(directory, sim.model, list(sim.regions), write_regions=out.regions)
        every = sim.config.time.snapshot_every
        self.snapshot_every = every if every > 0 else (0 if not out.snapshots else None)
        self.snapshots: List[Path] = []
        self.count = 0

    def emit(self, rec: TimeSeriesRecord, kinetic: KineticState, urban: UrbanState, final: bool) -> None:
        if self.writer is not None:
            self.writer.write(rec)
        if self.directory is not None and self._snapshot_due(final):
            path = self.directory / f"snap_{self.count}.vtk"
            write_vtk_snapshot(self.sim.model, kinetic, urban, self.sim.mesh, path, self.sim.ordinate_set,
                               self.sim.fields, title=f"{self.sim.config.name} t={rec.time!r}")
            self.snapshots.append(path)
        self.count += 1

    def _snapshot_due(self, final: bool) -> bool:
        if self.snapshot_every is None:
            # snapshots requested without a cadence: first and last output
            return self.count == 0 or final
        return self.snapshot_every > 0 and (self.count % self.snapshot_every == 0 or final)

    def close(self) -> List[Path]:
        if self.writer is None:
            return list(self.snapshots)
        self.writer.close()
        return list(self.writer.paths) + list(self.snapshots)


def run_simulation(sim: Simulation, out_dir: Optional[Union[str, Path]] = None,
                   tableau: Optional[ImexTableau] = None, keep_records: bool = True) -> RunResult:
    """
    Advance a built scenario to its end time.

    Outputs are written every `time.output_every` (and at the start and the
    end); without out_dir nothing touches the disk.
    """
    started = wall_clock.perf_counter()
    cfg = sim.config
    directory = None
    if out_dir is not None or cfg.output.directory is not None:
        directory = Path(out_dir if out_dir is not None else cfg.output.directory)
        directory.mkdir(parents=True, exist_ok=True)
    stepper = sim.stepper(tableau)
    controller = TimeController(cfg.time.cfl, cfg.time.t_end, dt_max=cfg.time.dt_limit)
    report = RunReport(scenario=cfg.name)
    kinetic, urban = sim.kinetic.copy(), sim.urban.copy()
    outputs = _Outputs(sim, directory)
    records: List[TimeSeriesRecord] = []

    def observe(final: bool) -> TimeSeriesRecord:
        rec = record(controller.t, sim.model, kinetic, urban, sim.mesh, sim.fields, sim.ordinate_set, sim.regions)
        if rec.r0 is None:
            report.undefined_r0_times.append(controller.t)
        outputs.emit(rec, kinetic, urban, final)
        if keep_records:
            records.append(rec)
        return rec

    initial = compartment_totals(kinetic, urban, sim.mesh, sim.model, sim.ordinate_set)
    first = observe(final=False)
    report.initial_r0 = first.r0
    if sim.model.is_seir:
        densities = TotalDensities(kinetic.densities(sim.ordinate_set) + urban.values, sim.model)
        report.regional_r0 = regional_r0_estimate(sim.fields, densities, sim.mesh)
    logger.info(f"Run {cfg.name}: t_end={cfg.time.t_end!r}, initial R0={first.r0}")

    every = cfg.time.output_every
    next_output = every if every is not None else None
    try:
        while not controller.done:
            dt = cfl_dt(kinetic, urban, sim.fields, sim.mesh, cfg.time.cfl, controller.dt_max, controller.remaining)
            dt = controller.clip(dt, next_output)
            result = stepper.step(kinetic, urban, dt, controller.t)
            kinetic, urban = result.kinetic, result.urban
            report.fallbacks += result.fallbacks
            controller.advance(dt)
            logger.debug(f"Step {controller.steps}: t={controller.t!r} dt={dt!r} fallbacks={result.fallbacks}")
            reached = next_output is not None and controller.t >= next_output - 1e-12 * max(1.0, next_output)
            if reached or controller.done:
                rec = observe(final=controller.done)
                logger.info(f"t={controller.t:.6g} step {controller.steps}, "
                            f"total {float(np.sum(rec.totals.total)):.10g}")
                while next_output is not None and next_output <= controller.t + 1e-12 * max(1.0, next_output):
                    next_output += every
    finally:
        report.manifest = [str(p) for p in outputs.close()]

    final = compartment_totals(kinetic, urban, sim.mesh, sim.model, sim.ordinate_set)
    report.conservation_drift = {
        "commuters": relative_drift(initial.commuters, final.commuters),
        "urban": relative_drift(initial.urban, final.urban),
        "total": relative_drift(initial.total, final.total),
    }
    if report.fallbacks:
        report.warn(f"positivity fallback zeroed {report.fallbacks} reconstruction gradients")
    if report.undefined_r0_times:
        report.warn(f"R0 undefined at {len(report.undefined_r0_times)} output time(s)")
    report.steps = controller.steps
    report.final_time = controller.t
    report.wall_time = wall_clock.perf_counter() - started
    if directory is not None:
        path = directory / "report.json"
        report.manifest.append(str(path))
        report.write_json(path)
    logger.info(f"Run {cfg.name} finished: {report.steps} steps in {report.wall_time:.2f}s, "
                f"drift {report.conservation_drift['total']:.3e}")
    return RunResult(report, kinetic, urban, records)
