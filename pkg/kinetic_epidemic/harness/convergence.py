"""
Self-convergence study on nested triangle refinements, and a linear
advection problem with a known solution that checks the harness itself.

Errors are measured on the reference mesh: every coarse solution is
prolonged conservatively onto the reference cells it contains.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import ArgumentError, ProjectionError
from ..imex import ImexTableau, cfl_dt
from ..mesh import Mesh, mesh_size, refine_triangles
from ..model import KineticState, UrbanState
from ..observables import integrate
from ..scenario.build import Simulation, build_simulation
from ..scenario.config import ScenarioConfig, config_with_overrides
from ..scenario.presets import CONVERGENCE_REGIMES
from ..spatial import cweno_reconstruct, divergence_matrix

logger = logging.getLogger("KineticEpidemic.Convergence")

TRACKED = ("S", "I", "j1_S", "j1_I")


@dataclass
class ConvergenceRow:
    chi: int
    h: float
    errors: Dict[str, float]
    orders: Dict[str, Optional[float]] = field(default_factory=dict)


@dataclass
class ConvergenceTable:
    """L1 errors and observed orders log(e_k/e_k+1)/log(h_k/h_k+1) of one regime."""

    label: str
    tau: Optional[float] = None
    lambda2: Optional[float] = None
    rows: List[ConvergenceRow] = field(default_factory=list)

    @property
    def variables(self) -> List[str]:
        return list(self.rows[0].errors) if self.rows else []

    def finest_order(self, variable: str) -> Optional[float]:
        return self.rows[-1].orders.get(variable) if self.rows else None

    def fill_orders(self) -> None:
        for prev, row in zip(self.rows, self.rows[1:]):
            for name, err in row.errors.items():
                row.orders[name] = observed_order(prev.errors[name], err, prev.h, row.h)

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "tau": self.tau,
            "lambda2": self.lambda2,
            "rows": [{"chi": r.chi, "h": r.h, "errors": r.errors, "orders": r.orders} for r in self.rows],
        }

    def format(self) -> str:
        names = self.variables
        head = f"{'chi':>4} {'h':>12} " + " ".join(f"{'L1 ' + n:>14} {'order':>7}" for n in names)
        lines = [f"{self.label} (tau={self.tau}, lambda2={self.lambda2})", head]
        for r in self.rows:
            cells = []
            for n in names:
                order = r.orders.get(n)
                cells.append(f"{r.errors[n]:14.4e} {order:7.2f}" if order is not None else f"{r.errors[n]:14.4e} {'':>7}")
            lines.append(f"{r.chi:4d} {r.h:12.4e} " + " ".join(cells))
        return "\n".join(lines)


def observed_order(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> Optional[float]:
    if not (e_coarse > 0 and e_fine > 0) or h_coarse == h_fine:
        return None
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def _lattice(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, int]:
    # base cell, (i, j, flipped) position and factor of every cell
    if mesh.base_parent is None:
        return np.arange(mesh.n_cells), np.zeros((mesh.n_cells, 3), dtype=np.int64), 1
    if mesh.base_lattice is None:
        raise ProjectionError("mesh was refined more than once; its cells have no lattice position")
    return mesh.base_parent, mesh.base_lattice, mesh.base_factor


def nested_owner(coarse: Mesh, fine: Mesh) -> np.ndarray:
    """
    Coarse cell containing each fine cell, for two refinements of one base mesh.

    Cells are matched through their base cell and sub-triangle position, then
    checked geometrically: the fine cells of every coarse cell must cover its
    area and share its centroid. ProjectionError for non-nested meshes.
    """
    if fine.base_parent is None and fine is not coarse:
        raise ProjectionError("fine mesh is not a refinement")
    c_base, c_pos, cf = _lattice(coarse)
    f_base, f_pos, ff = _lattice(fine)
    if ff % cf:
        raise ProjectionError(f"refinement {ff} is not nested in refinement {cf}")
    n_base = int(max(c_base.max(), f_base.max())) + 1
    m = ff // cf
    table = np.full((n_base, cf, cf, 2), -1, dtype=np.int64)
    table[c_base, c_pos[:, 0], c_pos[:, 1], c_pos[:, 2]] = np.arange(coarse.n_cells)

    # fine centroids in thirds of the fine lattice, then in coarse lattice units
    shift = 1 + f_pos[:, 2]
    I, ra = np.divmod(3 * f_pos[:, 0] + shift, 3 * m)
    J, rb = np.divmod(3 * f_pos[:, 1] + shift, 3 * m)
    flipped = (ra + rb > 3 * m).astype(np.int64)
    owner = table[f_base, I, J, flipped]
    if np.any(owner < 0):
        raise ProjectionError("fine cells fall outside every coarse cell")

    covered = np.bincount(owner, weights=fine.areas, minlength=coarse.n_cells)
    if not np.allclose(covered, coarse.areas, rtol=1e-9, atol=1e-14 * coarse.total_area):
        raise ProjectionError("meshes are not nested: fine cells do not tile the coarse cells")
    moments = np.stack([np.bincount(owner, weights=fine.areas * fine.centroids[:, d], minlength=coarse.n_cells)
                        for d in range(2)], axis=1)
    extent = float(np.ptp(coarse.vertices, axis=0).max())
    if not np.allclose(moments / covered[:, None], coarse.centroids, rtol=0.0, atol=1e-9 * extent):
        raise ProjectionError("meshes are not nested: fine cells do not match the coarse cell centroids")
    return owner


def prolong(values: np.ndarray, coarse: Mesh, fine: Mesh, owner: np.ndarray) -> np.ndarray:
    """
    Coarse cell averages carried onto the fine cells they contain.

    Each fine cell takes the CWENO reconstruction of its coarse owner at its
    centroid. The integral over every coarse cell is unchanged and linear
    fields are carried exactly.
    """
    values = np.asarray(values, dtype=float)
    poly = cweno_reconstruct(coarse, values)
    offset = fine.centroids - coarse.centroids[owner]
    out = poly.means[owner] + np.einsum("kmx,kx->km", poly.gradients[owner], offset)
    return out[:, 0] if values.ndim == 1 else out


def advance(sim: Simulation, t_end: float, dt: float, tableau: Optional[ImexTableau] = None) -> Tuple[KineticState, UrbanState]:
    """Fixed-step advance; the last step is shortened to land on t_end."""
    stepper = sim.stepper(tableau)
    kinetic, urban = sim.kinetic.copy(), sim.urban.copy()
    t = 0.0
    while t_end - t > 1e-12 * max(1.0, t_end):
        h = min(dt, t_end - t)
        result = stepper.step(kinetic, urban, h, t)
        kinetic, urban = result.kinetic, result.urban
        t += h
    return kinetic, urban


def tracked_values(sim: Simulation, kinetic: KineticState, urban: UrbanState) -> Dict[str, np.ndarray]:
    """Total S and I densities and the first-ordinate odd parity j⁽¹⁾ of S and I."""
    dens = kinetic.densities(sim.ordinate_set) + urban.values
    s, i = sim.model.index("S"), sim.model.index("I")
    return {"S": dens[s], "I": dens[i], "j1_S": kinetic.v[0, s, :, 0], "j1_I": kinetic.v[0, i, :, 0]}


def _check_chis(chi_list: Sequence[int]) -> Tuple[List[int], int]:
    chis = [int(c) for c in chi_list]
    if not chis or any(c < 1 for c in chis):
        raise ArgumentError("refinement factors must be positive integers")
    if chis != sorted(set(chis)):
        raise ArgumentError("refinement factors must be strictly ascending")
    chi_ref = 2 * chis[-1]
    for c in chis:
        if chi_ref % c:
            raise ProjectionError(f"refinement {c} is not nested in the reference refinement {chi_ref}")
    return chis, chi_ref


def convergence_study(config: ScenarioConfig, chi_list: Sequence[int] = (1, 2, 4),
                      regimes: Optional[Mapping[str, Tuple[float, float]]] = None,
                      nodes: Optional[int] = None, tableau: Optional[ImexTableau] = None) -> List[ConvergenceTable]:
    """
    One ConvergenceTable per regime (label → (tau, lambda²)).

    Every run of a regime, reference included, uses the stable step of the
    reference mesh, so that the tables measure the spatial error.
    """
    chis, chi_ref = _check_chis(chi_list)
    if config.mesh.refine != 1:
        raise ArgumentError("the base mesh of a convergence study must be unrefined")
    regimes = dict(regimes or CONVERGENCE_REGIMES)
    tables = []
    for label, (tau, lambda2) in regimes.items():
        overrides = [f"fields.tau={tau!r}", f"fields.lambda2={lambda2!r}"]
        if nodes is not None:
            overrides.append(f"model.velocity_nodes_per_quadrant={int(nodes)}")
        base = config_with_overrides(config, overrides)
        reference = build_simulation(config_with_overrides(base, [f"mesh.refine={chi_ref}"]))
        t_end = base.time.t_end
        dt = cfl_dt(reference.kinetic, reference.urban, reference.fields, reference.mesh, base.time.cfl,
                    base.time.dt_limit, t_end)
        logger.info(f"Convergence regime {label}: reference chi={chi_ref} "
                    f"({reference.mesh.n_cells} cells), dt={dt!r}")
        ref_values = tracked_values(reference, *advance(reference, t_end, dt, tableau))
        table = ConvergenceTable(label, tau, lambda2)
        for chi in chis:
            sim = build_simulation(config_with_overrides(base, [f"mesh.refine={chi}"]))
            values = tracked_values(sim, *advance(sim, t_end, dt, tableau))
            owner = nested_owner(sim.mesh, reference.mesh)
            errors = {
                name: float(integrate(reference.mesh,
                                      np.abs(prolong(values[name], sim.mesh, reference.mesh, owner) - ref_values[name])))
                for name in TRACKED
            }
            table.rows.append(ConvergenceRow(chi, mesh_size(sim.mesh), errors))
            logger.info(f"  chi={chi}: " + ", ".join(f"{n}={e:.3e}" for n, e in errors.items()))
        table.fill_orders()
        tables.append(table)
    return tables


def _advection_rate(mesh: Mesh, u: np.ndarray, velocity: np.ndarray) -> np.ndarray:
    poly = cweno_reconstruct(mesh, u)
    left, right = poly.edge_traces(mesh)
    vn = mesh.edge_normals @ velocity
    interior = mesh.edge_right >= 0
    # inflow walls see zero
    right = np.where(interior[:, None], right, 0.0)
    upwind = np.where(vn[:, None] > 0, left, right)
    return -(divergence_matrix(mesh) @ (vn[:, None] * upwind))[:, 0]


def gaussian_pulse(points: np.ndarray, center, width: float) -> np.ndarray:
    d2 = np.sum((points - np.asarray(center, dtype=float)) ** 2, axis=-1)
    return np.exp(-0.5 * d2 / width ** 2)


def advection_self_test(base_mesh: Mesh, chi_list: Sequence[int] = (2, 4, 8),
                        velocity: Sequence[float] = (1.0, 0.5), t_end: float = 0.2,
                        center: Sequence[float] = (-0.2, -0.1), width: float = 0.2,
                        cfl: float = 0.4) -> ConvergenceTable:
    """
    Gaussian pulse carried by a constant velocity, CWENO traces, upwind
    fluxes and Heun's method; errors against the exact pulse at t_end.
    """
    chis = [int(c) for c in chi_list]
    if chis != sorted(set(chis)) or chis[0] < 1:
        raise ArgumentError("refinement factors must be positive and strictly ascending")
    vel = np.asarray(velocity, dtype=float)
    speed = float(np.linalg.norm(vel))
    if not speed > 0:
        raise ArgumentError("advection velocity must be nonzero")
    table = ConvergenceTable("advection")
    for chi in chis:
        mesh = refine_triangles(base_mesh, chi)
        u = gaussian_pulse(mesh.centroids, center, width)
        dt_stable = cfl * float(np.min(2.0 * mesh.areas / mesh.perimeters)) / speed
        n_steps = max(1, math.ceil(t_end / dt_stable))
        dt = t_end / n_steps
        for _ in range(n_steps):
            u1 = u + dt * _advection_rate(mesh, u[:, None], vel)
            u = 0.5 * (u + u1 + dt * _advection_rate(mesh, u1[:, None], vel))
        exact = gaussian_pulse(mesh.centroids, np.asarray(center) + t_end * vel, width)
        error = float(integrate(mesh, np.abs(u - exact)))
        table.rows.append(ConvergenceRow(chi, mesh_size(mesh), {"u": error}))
        logger.info(f"Advection chi={chi}: {mesh.n_cells} cells, {n_steps} steps, L1={error:.3e}")
    table.fill_orders()
    return table
