"""
Diffusion-limit check: kinetic runs with λ² = 2D/τ against the explicit
reaction-diffusion reference, both from the same data and with the same
time steps.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ArgumentError
from ..imex import ImexTableau, MacroState, cell_length_scale, cfl_dt
from ..observables import integrate
from ..scenario.build import build_simulation
from ..scenario.config import ScenarioConfig, config_with_overrides
from .convergence import advance

logger = logging.getLogger("KineticEpidemic.AP")

DEFAULT_TAUS = (1e-2, 1e-4, 1e-6, 1e-8)


@dataclass
class APRow:
    tau: float
    lambda2: float
    dt: float
    discrepancy: float
    absolute: float


@dataclass
class APTable:
    diffusion: float
    rows: List[APRow] = field(default_factory=list)

    def is_monotone(self) -> bool:
        """Discrepancy nonincreasing as τ decreases."""
        ordered = sorted(self.rows, key=lambda r: -r.tau)
        return all(b.discrepancy <= a.discrepancy for a, b in zip(ordered, ordered[1:]))

    def to_dict(self) -> Dict:
        return {"diffusion": self.diffusion,
                "rows": [vars(r) for r in self.rows]}

    def format(self) -> str:
        lines = [f"D = {self.diffusion!r}", f"{'tau':>10} {'lambda2':>12} {'dt':>12} {'relative L1':>14}"]
        lines.extend(f"{r.tau:10.2e} {r.lambda2:12.4e} {r.dt:12.4e} {r.discrepancy:14.6e}" for r in self.rows)
        return "\n".join(lines)


def ap_study(config: ScenarioConfig, tau_list: Sequence[float] = DEFAULT_TAUS, diffusion: float = 0.5,
             tableau: Optional[ImexTableau] = None, dt: Optional[float] = None) -> APTable:
    """
    For every τ, the relative L1 distance at t_end between the total
    densities of the kinetic run and of the reaction-diffusion reference,
    with D = ½λ²τ held at `diffusion`.
    """
    if diffusion < 0:
        raise ArgumentError("diffusion coefficient must be nonnegative")
    if not tau_list or any(not t > 0 for t in tau_list):
        raise ArgumentError("relaxation times must be positive")
    table = APTable(diffusion)
    t_end = config.time.t_end
    for tau in tau_list:
        lambda2 = 2.0 * diffusion / tau
        sim = build_simulation(config_with_overrides(config, [f"fields.tau={tau!r}", f"fields.lambda2={lambda2!r}"]))
        step = dt
        if step is None:
            step = cfl_dt(sim.kinetic, sim.urban, sim.fields, sim.mesh, config.time.cfl, config.time.dt_limit, t_end)
            if diffusion > 0:
                h = cell_length_scale(sim.mesh)
                # the reference is explicit in the diffusion
                step = min(step, config.time.cfl * float(np.min(h ** 2)) / (4.0 * diffusion))
        kinetic, urban = advance(sim, t_end, step, tableau)
        kinetic_total = kinetic.densities(sim.ordinate_set) + urban.values

        limit = sim.limit_stepper(tableau)
        state: MacroState = sim.macro_state()
        t = 0.0
        while t_end - t > 1e-12 * max(1.0, t_end):
            h_t = min(step, t_end - t)
            state = limit.step(state, h_t, t)
            t += h_t
        reference = state.totals

        absolute = float(np.sum(integrate(sim.mesh, np.abs(kinetic_total - reference))))
        scale = float(np.sum(integrate(sim.mesh, np.abs(reference))))
        relative = absolute / scale if scale > 0 else absolute
        table.rows.append(APRow(tau, lambda2, step, relative, absolute))
        logger.info(f"tau={tau:.1e}: lambda2={lambda2:.3e}, dt={step:.3e}, relative L1={relative:.3e}")
    return table
