"""
IMEX Runge-Kutta time stepping of the commuter parity system and the
non-commuter reaction-diffusion system.

Transport and epidemic sources are explicit (Ã); the relaxation towards the
local equilibrium is implicit (A) and solved in closed form: the relaxation
has zero velocity moment, so the stage density follows from the explicit
terms and each parity is then updated pointwise. Per stage the odd parities
are solved first so that the even-parity transport can use the implicit
weights, which makes the τ→0 limit an explicit scheme for the diffusion
system (see DiffusionLimitStepper).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ArgumentError, StepFailure
from .mesh import Mesh
from .model import (
    CompartmentModel,
    KineticState,
    ParameterFields,
    TotalDensities,
    UrbanState,
    commuter_sources,
    reaction,
    urban_rhs,
)
from .ordinates import DEFAULT_NODES, OrdinateSet, density_moment, ordinates
from .spatial import TransportOperator, urban_diffusion_div

logger = logging.getLogger("KineticEpidemic.Imex")

GSA_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class ImexTableau:
    """Butcher pair: implicit (A, b) and explicit (Ã, b̃)."""

    A: np.ndarray
    b: np.ndarray
    A_tilde: np.ndarray
    b_tilde: np.ndarray
    name: str = "custom"

    @classmethod
    def from_rows(cls, A, b, A_tilde, b_tilde, name: str = "custom") -> "ImexTableau":
        tab = cls(np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float)),
                  np.atleast_2d(np.asarray(A_tilde, dtype=float)), np.atleast_1d(np.asarray(b_tilde, dtype=float)),
                  name)
        tab.check_dimensions()
        return tab

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def c(self) -> np.ndarray:
        return self.A.sum(axis=1)

    @property
    def c_tilde(self) -> np.ndarray:
        return self.A_tilde.sum(axis=1)

    def check_dimensions(self) -> None:
        s = len(self.b)
        if self.A.shape != (s, s) or self.A_tilde.shape != (s, s) or self.b_tilde.shape != (s,):
            raise ArgumentError(
                f"inconsistent tableau dimensions: A {self.A.shape}, b {self.b.shape}, "
                f"A_tilde {self.A_tilde.shape}, b_tilde {self.b_tilde.shape}"
            )
        if np.any(np.triu(self.A, 1) != 0):
            raise ArgumentError("implicit matrix must be lower triangular")
        if np.any(np.triu(self.A_tilde, 0) != 0):
            raise ArgumentError("explicit matrix must be strictly lower triangular")

    def order_defects(self) -> dict:
        """Residuals of the first- and second-order conditions."""
        return {
            "sum_b": abs(self.b.sum() - 1.0),
            "sum_b_tilde": abs(self.b_tilde.sum() - 1.0),
            "b_c": abs(self.b @ self.c - 0.5),
            "b_tilde_c_tilde": abs(self.b_tilde @ self.c_tilde - 0.5),
        }


def default_tableau() -> ImexTableau:
    """Three-stage second-order GSA pair with γ = 1 − √2/2, δ = 1 − 1/(2γ)."""
    g = 1.0 - math.sqrt(2.0) / 2.0
    d = 1.0 - 1.0 / (2.0 * g)
    return ImexTableau.from_rows(
        A=[[0.0, 0.0, 0.0], [0.0, g, 0.0], [0.0, 1.0 - g, g]],
        b=[0.0, 1.0 - g, g],
        A_tilde=[[0.0, 0.0, 0.0], [g, 0.0, 0.0], [d, 1.0 - d, 0.0]],
        b_tilde=[d, 1.0 - d, 0.0],
        name="ars-gsa-222",
    )


def euler_tableau() -> ImexTableau:
    """Forward/backward Euler pair."""
    return ImexTableau.from_rows(A=[[1.0]], b=[1.0], A_tilde=[[0.0]], b_tilde=[1.0], name="euler")


def gsa_check(tableau: ImexTableau, tol: float = GSA_TOL) -> bool:
    """a_sj = b_j for every j and ã_sj = b̃_j for j ≤ s−1."""
    tableau.check_dimensions()
    s = tableau.stages
    implicit_ok = np.all(np.abs(tableau.A[s - 1] - tableau.b) <= tol)
    explicit_ok = np.all(np.abs(tableau.A_tilde[s - 1, : s - 1] - tableau.b_tilde[: s - 1]) <= tol)
    return bool(implicit_ok and explicit_ok)


@dataclass
class TimeController:
    """Current time, end time and the step bounds of a run."""

    cfl: float
    t_end: float
    t: float = 0.0
    dt_max: float = math.inf
    steps: int = 0

    def __post_init__(self):
        if not 0.0 < self.cfl <= 1.0:
            raise ArgumentError(f"CFL number must lie in (0, 1], got {self.cfl}")
        if not self.dt_max > 0:
            raise ArgumentError("dt_max must be positive")
        if self.t_end < self.t:
            raise ArgumentError("end time precedes the start time")

    @property
    def remaining(self) -> float:
        return self.t_end - self.t

    @property
    def done(self) -> bool:
        return self.remaining <= 1e-12 * max(1.0, abs(self.t_end))

    def clip(self, dt: float, next_output: Optional[float] = None) -> float:
        """Clip a stable step to dt_max, the end time and the next output time."""
        dt = min(dt, self.dt_max, self.remaining)
        if next_output is not None and next_output > self.t:
            dt = min(dt, next_output - self.t)
        if not dt > 0:
            raise ArgumentError(f"non-positive time step {dt} at t={self.t}")
        return dt

    def advance(self, dt: float) -> None:
        self.t += dt
        self.steps += 1


def cell_length_scale(mesh: Mesh) -> np.ndarray:
    """2·area/perimeter per cell."""
    return 2.0 * mesh.areas / mesh.perimeters


def cfl_dt(kinetic: KineticState, urban: UrbanState, fields: ParameterFields, mesh: Mesh, cfl: float,
           dt_max: float = math.inf, remaining: Optional[float] = None) -> float:
    """
    Stable explicit step.

    Per cell and compartment the transport bound is max(h/λ, h²/(4D)) with
    D = ½λ²τ: the hyperbolic bound while the relaxation length λτ resolves
    the cell, the parabolic one in the diffusive regime. Urban diffusion
    adds h²/(4D^u). Without any bound the step is cfl·remaining (capped by
    dt_max).
    """
    if not 0.0 < cfl <= 1.0:
        raise ArgumentError(f"CFL number must lie in (0, 1], got {cfl}")
    if kinetic.u.shape[1:3] != fields.lam.shape or urban.values.shape != fields.lam.shape:
        raise ArgumentError("state and parameter fields do not match")
    h = cell_length_scale(mesh)[None, :]
    lam = fields.lam
    D = fields.diffusion
    Du = fields.Du
    with np.errstate(divide="ignore"):
        hyperbolic = np.where(lam > 0, h / np.where(lam > 0, lam, 1.0), np.inf)
        parabolic = np.where(D > 0, h ** 2 / (4.0 * np.where(D > 0, D, 1.0)), np.inf)
        urban_bound = np.where(Du > 0, h ** 2 / (4.0 * np.where(Du > 0, Du, 1.0)), np.inf)
    transport = np.where(np.isinf(hyperbolic), np.inf, np.maximum(hyperbolic, parabolic))
    bound = float(min(transport.min(initial=np.inf), urban_bound.min(initial=np.inf)))
    if math.isinf(bound):
        if remaining is not None and remaining > 0:
            dt = min(cfl * remaining, dt_max)
        else:
            dt = dt_max
        if math.isinf(dt):
            raise ArgumentError("no stability bound applies; set dt_max or the remaining time")
        return dt
    return min(cfl * bound, dt_max)


@dataclass(eq=False)
class StepResult:
    kinetic: KineticState
    urban: UrbanState
    dt: float
    fallbacks: int = 0
    gsa_defect: float = 0.0


def _model_for(n_compartments: int) -> CompartmentModel:
    return CompartmentModel("SIR" if n_compartments == 3 else "SEIR")


class ImexStepper:
    """
    One IMEX step of the coupled commuter / non-commuter system on a fixed
    mesh with fixed parameter fields.
    """

    def __init__(self, model: CompartmentModel, mesh: Mesh, ordinate_set: OrdinateSet,
                 fields: ParameterFields, tableau: Optional[ImexTableau] = None,
                 flux_source_form: str = "appendix", urban_diffusion_argument: str = "urban",
                 second_order: bool = True, diffusive_upwinding: bool = True,
                 positivity_guard: bool = True):
        self.model = model
        self.mesh = mesh
        self.ordinates = ordinate_set
        self.fields = fields
        self.tableau = tableau or default_tableau()
        if not gsa_check(self.tableau):
            raise ArgumentError(f"tableau {self.tableau.name} is not globally stiffly accurate")
        self.flux_source_form = flux_source_form
        self.urban_diffusion_argument = urban_diffusion_argument
        self.operator = TransportOperator(mesh, ordinate_set, fields, second_order=second_order,
                                          diffusive_upwinding=diffusive_upwinding,
                                          positivity_guard=positivity_guard)
        self._tau = fields.tau[None, :, :, None]
        self._has_urban_diffusion = bool(np.any(fields.Du > 0))

    def _diffusion(self, values: np.ndarray, D: np.ndarray) -> np.ndarray:
        return urban_diffusion_div(self.mesh, values, D)

    def urban_rates(self, urban: UrbanState, totals: TotalDensities, commuters: np.ndarray) -> np.ndarray:
        return urban_rhs(
            self.model, urban, totals, self.fields,
            diffusion_operator=self._diffusion if self._has_urban_diffusion else None,
            diffusion_argument=self.urban_diffusion_argument,
            commuter_densities=commuters,
        )

    def step(self, kinetic: KineticState, urban: UrbanState, dt: float, t: float = 0.0) -> StepResult:
        if not dt > 0 or not math.isfinite(dt):
            raise ArgumentError(f"time step must be positive and finite, got {dt}")
        tab = self.tableau
        op = self.operator
        od = self.ordinates
        s = tab.stages
        fallbacks_before = op.fallbacks

        Pu: List[np.ndarray] = []
        Pv: List[np.ndarray] = []
        Qu: List[np.ndarray] = []
        Qv: List[np.ndarray] = []
        Pw: List[np.ndarray] = []
        u = v = w = None

        for k in range(s):
            akk = tab.A[k, k]
            w = urban.values.copy()
            v_star = kinetic.v.copy()
            u_star = kinetic.u.copy()
            for j in range(k):
                at, a = tab.A_tilde[k, j], tab.A[k, j]
                if at != 0.0:
                    w += dt * at * Pw[j]
                    v_star += dt * at * Pv[j]
                    u_star += dt * at * Pu[j]
                if a != 0.0:
                    v_star += dt * a * Qv[j]
                    u_star += dt * a * Qu[j]

            # odd parities: v = v*/(1 + dt a_kk/τ)
            if akk > 0.0:
                v = v_star / (1.0 + dt * akk / self._tau)
                Qv.append((v - v_star) / (dt * akk))
            else:
                v = v_star
                Qv.append(-v / self._tau)
            v_traces = op.odd_traces(v)
            flux_rate = op.even_flux_rate(v_traces)

            # even parities: moment first, then the pointwise relaxation
            if akk > 0.0:
                u_star = u_star + dt * akk * flux_rate
                U = density_moment(u_star[0], u_star[1], od)[None, :, :, None]
                u = U + (u_star - U) / (1.0 + dt * akk / self._tau)
                Qu.append(flux_rate + (u - u_star) / (dt * akk))
            else:
                u = u_star
                U = density_moment(u[0], u[1], od)[None, :, :, None]
                Qu.append(flux_rate + (U - u) / self._tau)

            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
                raise StepFailure("non-finite stage value", time=t, stage=k + 1)

            if k == s - 1 and tab.b_tilde[k] == 0.0:
                break
            # explicit rates at this stage
            stage = KineticState(u, v)
            commuters = U[0, :, :, 0]
            totals = TotalDensities(commuters + w, self.model)
            sources = commuter_sources(self.model, stage, totals, self.fields, od,
                                       moments=commuters, form=self.flux_source_form)
            u_traces = op.even_traces(u)
            Pu.append(sources.epidemic_u + op.even_dissipation_rate(u_traces))
            Pv.append(op.odd_rate(u_traces, v_traces) + sources.epidemic_v)
            Pw.append(self.urban_rates(UrbanState(w), totals, commuters))

        fallbacks = op.fallbacks - fallbacks_before
        final, defect = self._weighted_update(kinetic, urban, (u, v, w), Pu, Pv, Qu, Qv, Pw, dt)
        if tab.b_tilde[-1] != 0.0:
            # the explicit weights do not end on the last stage
            u, v, w = final
            defect = 0.0
        elif defect > 1e-8:
            raise StepFailure(f"final update departs from the last stage (defect {defect:.3e})", time=t, stage=s)
        return StepResult(KineticState(u, v), UrbanState(w), dt, fallbacks, defect)

    def _weighted_update(self, kinetic, urban, last_stage, Pu, Pv, Qu, Qv, Pw, dt):
        """b-weighted final update and its largest scaled gap to the last stage."""
        tab = self.tableau
        defect = 0.0
        final = []
        for start, last, P, Q in zip((kinetic.u, kinetic.v, urban.values), last_stage, (Pu, Pv, Pw), (Qu, Qv, None)):
            total = start.copy()
            scale = np.abs(start).copy()
            for j in range(tab.stages):
                if tab.b_tilde[j] != 0.0:
                    term = dt * tab.b_tilde[j] * P[j]
                    total += term
                    scale += np.abs(term)
                if Q is not None and tab.b[j] != 0.0:
                    term = dt * tab.b[j] * Q[j]
                    total += term
                    scale += np.abs(term)
            gap = np.abs(total - last) / (scale + 1e-300)
            defect = max(defect, float(np.max(gap, initial=0.0)))
            final.append(total)
        return final, defect


def imex_step(kinetic: KineticState, urban: UrbanState, fields: ParameterFields, mesh: Mesh,
              tableau: Optional[ImexTableau], dt: float, model: Optional[CompartmentModel] = None,
              ordinate_set: Optional[OrdinateSet] = None, **options) -> tuple:
    """
    Advance (kinetic, urban) by one step.

    Builds a throwaway ImexStepper; time loops keep one stepper instead.
    """
    model = model or _model_for(kinetic.u.shape[1])
    ordinate_set = ordinate_set or ordinates(kinetic.u.shape[-1])
    stepper = ImexStepper(model, mesh, ordinate_set, fields, tableau, **options)
    result = stepper.step(kinetic, urban, dt)
    return result.kinetic, result.urban


@dataclass(eq=False)
class MacroState:
    """Commuter and non-commuter densities, each (C, K)."""

    commuters: np.ndarray
    urban: np.ndarray

    def copy(self) -> "MacroState":
        return MacroState(self.commuters.copy(), self.urban.copy())

    @property
    def totals(self) -> np.ndarray:
        return self.commuters + self.urban


@dataclass(eq=False)
class DiffusionLimitStepper:
    """
    Explicit Runge-Kutta step of the commuter reaction-diffusion limit.

    The commuter flux per ordinate is Fick's law built from the same density
    reconstruction and central edge average the kinetic transport uses; per
    stage the fluxes are composed with the implicit weights exactly as the
    kinetic stages compose their relaxed odd parities.
    """

    model: CompartmentModel
    mesh: Mesh
    ordinate_set: OrdinateSet
    fields: ParameterFields
    tableau: ImexTableau = field(default_factory=default_tableau)
    urban_diffusion_argument: str = "urban"
    second_order: bool = True
    positivity_guard: bool = True

    def __post_init__(self):
        self.operator = TransportOperator(self.mesh, self.ordinate_set, self.fields,
                                          second_order=self.second_order,
                                          positivity_guard=self.positivity_guard)
        self._two_D = 2.0 * self.fields.diffusion[None, :, :, None]
        self._has_urban_diffusion = bool(np.any(self.fields.Du > 0))

    def _isotropic(self, densities: np.ndarray) -> np.ndarray:
        return KineticState.isotropic(densities, self.ordinate_set.n).u

    def fick_flux(self, densities: np.ndarray) -> np.ndarray:
        """Limit odd parities 2D·(−∇ρ·d) per ordinate, (2, C, K, n)."""
        op = self.operator
        return self._two_D * op.gradient_rate(op.even_traces(self._isotropic(densities)))

    def transport_rate(self, flux: np.ndarray) -> np.ndarray:
        """Density rate −∇·J carried by per-ordinate fluxes, (C, K)."""
        op = self.operator
        rate = op.even_flux_rate(op.odd_traces(flux))
        return density_moment(rate[0], rate[1], self.ordinate_set)

    def step(self, state: MacroState, dt: float, t: float = 0.0) -> MacroState:
        if not dt > 0 or not math.isfinite(dt):
            raise ArgumentError(f"time step must be positive and finite, got {dt}")
        tab = self.tableau
        s = tab.stages
        diffusion = (lambda f, D: urban_diffusion_div(self.mesh, f, D)) if self._has_urban_diffusion else None
        V: List[Optional[np.ndarray]] = []
        T: List[Optional[np.ndarray]] = []
        F: List[np.ndarray] = []
        E: List[np.ndarray] = []
        Pw: List[np.ndarray] = []
        rho = w = None
        for k in range(s):
            akk = tab.A[k, k]
            if akk > 0.0:
                acc = np.zeros((2,) + state.commuters.shape + (self.ordinate_set.n,))
                for j in range(k):
                    if tab.A_tilde[k, j] != 0.0:
                        acc = acc + tab.A_tilde[k, j] * F[j]
                    if tab.A[k, j] != 0.0 and V[j] is not None:
                        acc = acc - tab.A[k, j] * V[j]
                V.append(acc / akk)
                T.append(self.transport_rate(V[k]))
            else:
                V.append(None)
                T.append(None)

            rho = state.commuters.copy()
            w = state.urban.copy()
            for j in range(k + 1):
                if tab.A[k, j] != 0.0 and T[j] is not None:
                    rho += dt * tab.A[k, j] * T[j]
                if j < k and tab.A_tilde[k, j] != 0.0:
                    rho += dt * tab.A_tilde[k, j] * E[j]
                    w += dt * tab.A_tilde[k, j] * Pw[j]
            if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(w))):
                raise StepFailure("non-finite stage value", time=t, stage=k + 1)
            if k == s - 1:
                break
            totals = TotalDensities(rho + w, self.model)
            E.append(reaction(self.model, rho, totals, self.fields))
            Pw.append(urban_rhs(self.model, UrbanState(w), totals, self.fields,
                                diffusion_operator=diffusion,
                                diffusion_argument=self.urban_diffusion_argument,
                                commuter_densities=rho))
            F.append(self.fick_flux(rho))
        return MacroState(rho, w)


def explicit_rd_step(state: MacroState, fields: ParameterFields, mesh: Mesh,
                     tableau: Optional[ImexTableau], dt: float, model: Optional[CompartmentModel] = None,
                     ordinate_set: Optional[OrdinateSet] = None, n_nodes: int = DEFAULT_NODES) -> MacroState:
    """
    One explicit step of the reaction-diffusion reference system.

    Without ordinate_set the diffusion coefficients use n_nodes per quadrant,
    the same default as a scenario.
    """
    model = model or _model_for(state.commuters.shape[0])
    ordinate_set = ordinate_set or ordinates(n_nodes)
    stepper = DiffusionLimitStepper(model, mesh, ordinate_set, fields, tableau or default_tableau())
    return stepper.step(state, dt)
