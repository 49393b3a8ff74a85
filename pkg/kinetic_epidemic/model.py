"""
Compartment models, parameter fields, states and non-transport sources.

Array layout used everywhere in the solver:

    kinetic even parities u[p, c, k, i]  (p parity, c compartment, k cell, i node)
    kinetic odd parities  v[p, c, k, i]
    urban densities       U[c, k]
"""

import logging
from dataclasses import dataclass, fields as dataclass_fields
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import ArgumentError, ConfigurationError, DomainError
from .ordinates import OrdinateSet, density_moment

logger = logging.getLogger("KineticEpidemic.Model")

COMPARTMENTS = {
    "SIR": ("S", "I", "R"),
    "SEIR": ("S", "E", "I", "R"),
}

FLUX_SOURCE_FORMS = ("appendix", "moment")


@dataclass(frozen=True)
class CompartmentModel:
    kind: str

    def __post_init__(self):
        if self.kind not in COMPARTMENTS:
            raise ArgumentError(f"unknown compartment model {self.kind!r}, expected SIR or SEIR")

    @property
    def compartments(self) -> Tuple[str, ...]:
        return COMPARTMENTS[self.kind]

    @property
    def n_compartments(self) -> int:
        return len(self.compartments)

    def index(self, name: str) -> int:
        try:
            return self.compartments.index(name)
        except ValueError:
            raise ArgumentError(f"compartment {name!r} is not part of the {self.kind} model")

    @property
    def is_seir(self) -> bool:
        return self.kind == "SEIR"


def seir_reduced_params(sigma, zeta, a, gamma_E):
    """
    Reduced SEIR rates ã = σζa and γ̃_E = (1−ζ)γ_E.

    Works elementwise on scalars or per-cell arrays.
    """
    sigma, zeta, a, gamma_E = (np.asarray(x, dtype=float) for x in (sigma, zeta, a, gamma_E))
    if np.any((sigma < 0) | (sigma > 1)) or np.any((zeta < 0) | (zeta > 1)):
        raise DomainError("sigma and zeta must lie in [0, 1]")
    if np.any(a < 0) or np.any(gamma_E < 0):
        raise DomainError("a and gamma_E must be nonnegative")
    a_tilde = sigma * zeta * a
    gamma_E_tilde = (1.0 - zeta) * gamma_E
    if a_tilde.ndim == 0:
        return float(a_tilde), float(gamma_E_tilde)
    return a_tilde, gamma_E_tilde


@dataclass(frozen=True, eq=False)
class ParameterFields:
    """
    Per-cell epidemic and transport parameters.

    lam, tau and Du are (compartments, cells); the others are (cells,).
    lam holds propagation speeds λ, not λ².
    """

    beta_I: np.ndarray
    kappa_I: np.ndarray
    p: np.ndarray
    gamma_I: np.ndarray
    lam: np.ndarray
    tau: np.ndarray
    Du: np.ndarray
    beta_E: np.ndarray
    kappa_E: np.ndarray
    sigma: np.ndarray
    zeta: np.ndarray
    a: np.ndarray
    gamma_E: np.ndarray

    @classmethod
    def build(cls, model: CompartmentModel, n_cells: int, **values) -> "ParameterFields":
        """
        Broadcast scalars or per-cell arrays into a validated field set.

        lam / tau / Du accept a scalar, a (cells,) array applied to every
        compartment, a (compartments, cells) array, or a dict
        {compartment: scalar-or-array}.
        """
        defaults = dict(beta_I=0.0, kappa_I=0.0, p=1.0, gamma_I=0.0, lam=0.0, tau=1.0, Du=0.0,
                        beta_E=0.0, kappa_E=0.0, sigma=1.0, zeta=1.0, a=0.0, gamma_E=0.0)
        unknown = set(values) - set(defaults)
        if unknown:
            raise ArgumentError(f"unknown parameter field(s): {', '.join(sorted(unknown))}")
        merged = {**defaults, **values}
        out = {}
        for name, value in merged.items():
            if name in ("lam", "tau", "Du"):
                out[name] = _per_compartment(name, value, model, n_cells)
            else:
                arr = np.broadcast_to(np.asarray(value, dtype=float), (n_cells,)).copy()
                out[name] = arr
        fields = cls(**out)
        fields.validate(model)
        return fields

    def validate(self, model: CompartmentModel) -> None:
        for f in dataclass_fields(self):
            arr = getattr(self, f.name)
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"parameter field {f.name} has non-finite values")
            if np.any(arr < 0):
                raise DomainError(f"parameter field {f.name} must be nonnegative")
        if np.any(self.tau <= 0):
            raise DomainError("relaxation time tau must be positive")
        if np.any(self.sigma > 1) or np.any(self.zeta > 1):
            raise DomainError("sigma and zeta must lie in [0, 1]")
        if model.is_seir and np.any(self.p != 1.0):
            raise ConfigurationError("the SEIR model uses the bilinear incidence exponent p = 1")
        if self.lam.shape[0] != model.n_compartments:
            raise ArgumentError("per-compartment fields do not match the compartment model")

    @property
    def n_cells(self) -> int:
        return len(self.beta_I)

    @property
    def lambda2(self) -> np.ndarray:
        return self.lam ** 2

    @property
    def diffusion(self) -> np.ndarray:
        """Limit diffusion coefficients D = ½λ²τ, (compartments, cells)."""
        return 0.5 * self.lam ** 2 * self.tau

    @property
    def a_tilde(self) -> np.ndarray:
        return self.sigma * self.zeta * self.a

    @property
    def gamma_E_tilde(self) -> np.ndarray:
        return (1.0 - self.zeta) * self.gamma_E

    def with_values(self, model: CompartmentModel, **values) -> "ParameterFields":
        updated = {f.name: getattr(self, f.name) for f in dataclass_fields(self)}
        for name, value in values.items():
            if name in ("lam", "tau", "Du"):
                updated[name] = _per_compartment(name, value, model, self.n_cells)
            else:
                updated[name] = np.broadcast_to(np.asarray(value, dtype=float), (self.n_cells,)).copy()
        fields = ParameterFields(**updated)
        fields.validate(model)
        return fields


def _per_compartment(name, value, model: CompartmentModel, n_cells: int) -> np.ndarray:
    n_comp = model.n_compartments
    if isinstance(value, dict):
        arr = np.zeros((n_comp, n_cells))
        default = value.get("*", 0.0 if name != "tau" else 1.0)
        for c, comp in enumerate(model.compartments):
            arr[c] = np.broadcast_to(np.asarray(value.get(comp, default), dtype=float), (n_cells,))
        unknown = set(value) - set(model.compartments) - {"*"}
        if unknown:
            raise ArgumentError(f"{name}: unknown compartment(s) {sorted(unknown)}")
        return arr
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 2:
        if arr.shape != (n_comp, n_cells):
            raise ArgumentError(f"{name} must have shape {(n_comp, n_cells)}, got {arr.shape}")
        return arr.copy()
    return np.broadcast_to(arr, (n_cells,))[None, :].repeat(n_comp, axis=0)


@dataclass(eq=False)
class KineticState:
    """Commuter parities: u (even, r) and v (odd, j), each (2, C, K, n)."""

    u: np.ndarray
    v: np.ndarray

    @property
    def r1(self) -> np.ndarray:
        return self.u[0]

    @property
    def r2(self) -> np.ndarray:
        return self.u[1]

    @property
    def j1(self) -> np.ndarray:
        return self.v[0]

    @property
    def j2(self) -> np.ndarray:
        return self.v[1]

    @classmethod
    def isotropic(cls, densities: np.ndarray, n_nodes: int) -> "KineticState":
        """r1 = r2 = density at every node, j = 0."""
        dens = np.asarray(densities, dtype=float)
        u = np.broadcast_to(dens[None, :, :, None], (2,) + dens.shape + (n_nodes,)).copy()
        return cls(u=u, v=np.zeros_like(u))

    def densities(self, ordinate_set: OrdinateSet) -> np.ndarray:
        """Commuter density moments, (C, K)."""
        return density_moment(self.u[0], self.u[1], ordinate_set)

    def copy(self) -> "KineticState":
        return KineticState(self.u.copy(), self.v.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v)))


@dataclass(eq=False)
class UrbanState:
    """Non-commuter densities, (C, K)."""

    values: np.ndarray

    def get(self, model: CompartmentModel, name: str) -> np.ndarray:
        return self.values[model.index(name)]

    def copy(self) -> "UrbanState":
        return UrbanState(self.values.copy())

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


@dataclass(frozen=True, eq=False)
class TotalDensities:
    """Commuter moment + urban density, (C, K); recomputed, never integrated."""

    values: np.ndarray
    model: CompartmentModel

    def get(self, name: str) -> np.ndarray:
        return self.values[self.model.index(name)]

    @property
    def I_T(self) -> np.ndarray:
        return self.get("I")

    @property
    def E_T(self) -> np.ndarray:
        return self.get("E") if self.model.is_seir else np.zeros_like(self.values[0])

    @property
    def S_T(self) -> np.ndarray:
        return self.get("S")


def total_densities(model: CompartmentModel, kinetic: KineticState, urban: UrbanState,
                    ordinate_set: OrdinateSet) -> TotalDensities:
    return TotalDensities(kinetic.densities(ordinate_set) + urban.values, model)


def _check_nonnegative(**arrays) -> None:
    for name, arr in arrays.items():
        if np.any(np.asarray(arr) < 0):
            raise DomainError(f"{name} must be nonnegative")


def incidence_I(g, I_T, beta_I, kappa_I, p=1.0):
    """β g I_T^p / (1 + κ I_T)."""
    _check_nonnegative(g=g, I_T=I_T, beta_I=beta_I, kappa_I=kappa_I, p=p)
    return _incidence_I(np.asarray(g, dtype=float), np.asarray(I_T, dtype=float), beta_I, kappa_I, p)


def incidence_E(g, E_T, beta_E, kappa_E, zeta):
    """β_E g (1−ζ)E_T / (1 + κ_E (1−ζ)E_T)."""
    _check_nonnegative(g=g, E_T=E_T, beta_E=beta_E, kappa_E=kappa_E)
    if np.any(np.asarray(zeta) < 0) or np.any(np.asarray(zeta) > 1):
        raise DomainError("zeta must lie in [0, 1]")
    return _incidence_E(np.asarray(g, dtype=float), np.asarray(E_T, dtype=float), beta_E, kappa_E, zeta)


def _incidence_I(g, I_T, beta, kappa, p):
    if np.all(np.asarray(p) == 1.0):
        force = beta * I_T / (1.0 + kappa * I_T)
    else:
        I_pos = np.maximum(I_T, 0.0)
        force = beta * I_pos ** p / (1.0 + kappa * I_pos)
    return g * force


def _incidence_E(g, E_T, beta, kappa, zeta):
    asym = (1.0 - zeta) * E_T
    return g * beta * asym / (1.0 + kappa * asym)


def _expand(arr, extra_dims: int):
    arr = np.asarray(arr)
    if arr.ndim == 0 or extra_dims == 0:
        return arr
    return arr.reshape(arr.shape + (1,) * extra_dims)


def reaction(model: CompartmentModel, args: np.ndarray, totals: TotalDensities,
             fields: ParameterFields) -> np.ndarray:
    """
    Epidemic reaction terms evaluated on per-compartment arguments.

    The terms are linear in args (the transmission forces depend on the
    totals only), which lets the same routine produce the even-parity,
    odd-parity and urban sources.

    Args:
        args: (C, K, ...) densities or parities per compartment
        totals: total densities driving transmission

    Returns:
        (C, K, ...) rates; they sum to zero over compartments
    """
    extra = args.ndim - 2
    ex = lambda a: _expand(a, extra)  # noqa: E731
    out = np.empty_like(args)
    I_T = ex(totals.I_T)
    gamma_I = ex(fields.gamma_I)
    if model.kind == "SIR":
        S, I, R = 0, 1, 2
        F = _incidence_I(args[S], I_T, ex(fields.beta_I), ex(fields.kappa_I), ex(fields.p))
        out[S] = -F
        out[I] = F - gamma_I * args[I]
        out[R] = gamma_I * args[I]
        return out

    S, E, I, R = 0, 1, 2, 3
    E_T = ex(totals.E_T)
    F_I = _incidence_I(args[S], I_T, ex(fields.beta_I), ex(fields.kappa_I), 1.0)
    F_E = _incidence_E(args[S], E_T, ex(fields.beta_E), ex(fields.kappa_E), ex(fields.zeta))
    a_t = ex(fields.a_tilde)
    g_t = ex(fields.gamma_E_tilde)
    out[S] = -F_I - F_E
    out[E] = F_I + F_E - (a_t + g_t) * args[E]
    out[I] = a_t * args[E] - gamma_I * args[I]
    out[R] = g_t * args[E] + gamma_I * args[I]
    return out


@dataclass(frozen=True, eq=False)
class CommuterSources:
    """Split sources for every (parity, compartment, cell, node)."""

    epidemic_u: np.ndarray
    epidemic_v: np.ndarray
    relax_u: np.ndarray
    relax_v: np.ndarray


def odd_parity_reaction(model: CompartmentModel, v: np.ndarray, totals: TotalDensities,
                        fields: ParameterFields, form: str = "appendix") -> np.ndarray:
    """
    Epidemic sources of the odd parities v (2, C, K, n).

    appendix: every argument of compartment Y's source is Y's own j.
    moment:   argument X of compartment Y is (λ_Y/λ_X) j_X, zero when λ_X = 0.
    """
    if form not in FLUX_SOURCE_FORMS:
        raise ArgumentError(f"unknown flux source form {form!r}")
    vc = np.moveaxis(v, 0, 2)            # (C, K, 2, n)
    if form == "appendix":
        out = np.empty_like(vc)
        for y in range(model.n_compartments):
            own = np.broadcast_to(vc[y], vc.shape)
            out[y] = reaction(model, own, totals, fields)[y]
    else:
        lam = fields.lam[:, :, None, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(lam > 0, vc / np.where(lam > 0, lam, 1.0), 0.0)
        out = reaction(model, scaled, totals, fields) * lam
    return np.moveaxis(out, 2, 0)


def commuter_sources(model: CompartmentModel, kinetic: KineticState, totals: TotalDensities,
                     fields: ParameterFields, ordinate_set: OrdinateSet,
                     moments: Optional[np.ndarray] = None,
                     form: str = "appendix") -> CommuterSources:
    """
    Epidemic (explicit) and relaxation (stiff) sources of the parity system.

    Args:
        moments: commuter densities (C, K); computed from the state when omitted
        form: odd-parity source form, "appendix" or "moment"
    """
    if kinetic.u.shape[1] != model.n_compartments or totals.values.shape != kinetic.u.shape[1:3]:
        raise ArgumentError("state, totals and compartment model sizes are inconsistent")
    if moments is None:
        moments = kinetic.densities(ordinate_set)
    uc = np.moveaxis(kinetic.u, 0, 2)     # (C, K, 2, n)
    epi_u = np.moveaxis(reaction(model, uc, totals, fields), 2, 0)
    epi_v = odd_parity_reaction(model, kinetic.v, totals, fields, form)
    tau = fields.tau[None, :, :, None]
    relax_u = (moments[None, :, :, None] - kinetic.u) / tau
    relax_v = -kinetic.v / tau
    return CommuterSources(epi_u, epi_v, relax_u, relax_v)


def urban_rhs(model: CompartmentModel, urban: UrbanState, totals: TotalDensities,
              fields: ParameterFields,
              diffusion_operator: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
              diffusion_argument: str = "urban",
              commuter_densities: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Reaction plus ∇·(D^u ∇·) rates of the non-commuters, (C, K).

    Args:
        diffusion_operator: callable(field (K,), D (K,)) -> divergence (K,);
            None disables diffusion
        diffusion_argument: "urban" diffuses the urban density itself,
            "commuter" diffuses the commuter density (literal reading)
    """
    rates = reaction(model, urban.values, totals, fields)
    if diffusion_operator is None:
        return rates
    if diffusion_argument == "urban":
        source = urban.values
    elif diffusion_argument == "commuter":
        if commuter_densities is None:
            raise ArgumentError("commuter densities are needed to diffuse the commuter argument")
        source = commuter_densities
    else:
        raise ArgumentError(f"unknown urban diffusion argument {diffusion_argument!r}")
    for c in range(model.n_compartments):
        if np.any(fields.Du[c] > 0):
            rates[c] += diffusion_operator(source[c], fields.Du[c])
    return rates
