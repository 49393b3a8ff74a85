from __future__ import annotations

import numpy as np
import pytest

from kinetic_epidemic.errors import ArgumentError, ConfigurationError, DomainError
from kinetic_epidemic.model import (
    CompartmentModel,
    KineticState,
    ParameterFields,
    TotalDensities,
    UrbanState,
    commuter_sources,
    incidence_E,
    incidence_I,
    odd_parity_reaction,
    reaction,
    seir_reduced_params,
    total_densities,
    urban_rhs,
)
from kinetic_epidemic.ordinates import density_moment, ordinates


def test_compartment_models(sir, seir):
    assert sir.compartments == ("S", "I", "R")
    assert seir.compartments == ("S", "E", "I", "R")
    assert seir.index("I") == 2
    assert seir.is_seir and not sir.is_seir
    with pytest.raises(ArgumentError):
        CompartmentModel("SIS")
    with pytest.raises(ArgumentError):
        sir.index("E")


def test_seir_reduced_params():
    a_t, g_t = seir_reduced_params(0.25, 0.25, 1.0 / 7.0, 1.0 / 12.0)
    assert a_t == pytest.approx(0.0625 / 7.0)
    assert g_t == pytest.approx(0.0625)
    a_arr, g_arr = seir_reduced_params(np.array([1.0, 0.5]), 1.0, 2.0, 3.0)
    np.testing.assert_allclose(a_arr, [2.0, 1.0])
    np.testing.assert_allclose(g_arr, [0.0, 0.0])
    with pytest.raises(DomainError):
        seir_reduced_params(1.5, 0.5, 1.0, 1.0)
    with pytest.raises(DomainError):
        seir_reduced_params(0.5, 0.5, -1.0, 1.0)


def test_parameter_fields_broadcast(sir):
    fields = ParameterFields.build(sir, 4, beta_I=2.0, lam={"*": 2.0, "I": 0.0}, tau=np.arange(1.0, 5.0))
    assert fields.n_cells == 4
    assert fields.lam.shape == (3, 4)
    np.testing.assert_allclose(fields.lam[1], 0.0)
    np.testing.assert_allclose(fields.lam[0], 2.0)
    np.testing.assert_allclose(fields.tau[2], [1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(fields.diffusion[0], 0.5 * 4.0 * np.arange(1.0, 5.0))
    np.testing.assert_allclose(fields.lambda2[0], 4.0)
    # defaults
    np.testing.assert_allclose(fields.p, 1.0)
    np.testing.assert_allclose(fields.Du, 0.0)


def test_parameter_fields_with_values(sir):
    fields = ParameterFields.build(sir, 3, beta_I=1.0, lam=1.0)
    changed = fields.with_values(sir, beta_I=[1.0, 2.0, 3.0], tau=0.1)
    np.testing.assert_allclose(changed.beta_I, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(changed.tau, 0.1)
    np.testing.assert_allclose(fields.tau, 1.0)


@pytest.mark.parametrize(
    "values, error",
    [
        ({"beta_I": -1.0}, DomainError),
        ({"tau": 0.0}, DomainError),
        ({"gamma_I": np.nan}, DomainError),
        ({"zeta": 1.5}, DomainError),
        ({"lam": np.ones((2, 3))}, ArgumentError),
        ({"lam": {"X": 1.0}}, ArgumentError),
        ({"velocity": 1.0}, ArgumentError),
    ],
)
def test_parameter_fields_rejects(sir, values, error):
    with pytest.raises(error):
        ParameterFields.build(sir, 3, **values)


def test_seir_requires_bilinear_incidence(seir):
    with pytest.raises(ConfigurationError):
        ParameterFields.build(seir, 3, p=2.0)


def test_incidence_functions():
    assert incidence_I(0.9, 0.1, 2.0, 0.0) == pytest.approx(0.18)
    assert incidence_I(0.9, 0.1, 2.0, 10.0) == pytest.approx(0.09)
    assert incidence_I(1.0, 0.25, 1.0, 0.0, p=2.0) == pytest.approx(0.0625)
    assert incidence_E(1.0, 0.4, 1.0, 0.0, 0.5) == pytest.approx(0.2)
    assert incidence_E(1.0, 0.4, 1.0, 0.0, 1.0) == pytest.approx(0.0)
    with pytest.raises(DomainError):
        incidence_I(1.0, -0.1, 1.0, 0.0)
    with pytest.raises(DomainError):
        incidence_E(1.0, 0.1, 1.0, 0.0, 1.2)


def test_isotropic_state(od2):
    dens = np.array([[1.0, 2.0], [0.5, 0.0], [0.0, 0.25]])
    state = KineticState.isotropic(dens, od2.n)
    assert state.u.shape == (2, 3, 2, od2.n)
    np.testing.assert_allclose(state.densities(od2), dens)
    np.testing.assert_array_equal(state.v, 0.0)
    np.testing.assert_array_equal(state.r1, state.r2)
    clone = state.copy()
    clone.u[0] = 9.0
    assert state.u[0, 0, 0, 0] == 1.0


def test_total_densities(sir, od2):
    kinetic = KineticState.isotropic(np.ones((3, 2)), od2.n)
    urban = UrbanState(np.full((3, 2), 0.5))
    totals = total_densities(sir, kinetic, urban, od2)
    np.testing.assert_allclose(totals.I_T, 1.5)
    np.testing.assert_allclose(totals.E_T, 0.0)
    np.testing.assert_allclose(urban.get(sir, "R"), 0.5)


def _random_totals(model, n_cells, rng):
    return TotalDensities(rng.uniform(0.1, 1.0, (model.n_compartments, n_cells)), model)


@pytest.mark.parametrize("kind", ["SIR", "SEIR"])
def test_reaction_conserves_population(kind):
    rng = np.random.default_rng(3)
    model = CompartmentModel(kind)
    n = 5
    fields = ParameterFields.build(
        model, n, beta_I=rng.uniform(0, 5, n), kappa_I=0.3, gamma_I=0.7,
        beta_E=1.2, kappa_E=0.1, sigma=0.6, zeta=0.4, a=0.5, gamma_E=0.2,
    )
    totals = _random_totals(model, n, rng)
    args = rng.uniform(0.0, 1.0, (model.n_compartments, n, 2, 3))
    rates = reaction(model, args, totals, fields)
    np.testing.assert_allclose(rates.sum(axis=0), 0.0, atol=1e-14)


def test_sir_reaction_values(sir):
    fields = ParameterFields.build(sir, 1, beta_I=2.0, gamma_I=0.5)
    totals = TotalDensities(np.array([[0.9], [0.1], [0.0]]), sir)
    rates = reaction(sir, totals.values, totals, fields)
    np.testing.assert_allclose(rates[:, 0], [-0.18, 0.18 - 0.05, 0.05])


def test_seir_reaction_values(seir):
    fields = ParameterFields.build(seir, 1, beta_I=1.0, beta_E=2.0, gamma_I=0.5, sigma=1.0, zeta=0.5,
                                   a=0.4, gamma_E=0.6)
    values = np.array([[0.8], [0.1], [0.1], [0.0]])
    totals = TotalDensities(values, seir)
    rates = reaction(seir, values, totals, fields)[:, 0]
    f_i = 0.8 * 1.0 * 0.1
    f_e = 0.8 * 2.0 * 0.5 * 0.1
    a_t, g_t = 0.5 * 0.4, 0.5 * 0.6
    np.testing.assert_allclose(rates, [-f_i - f_e, f_i + f_e - (a_t + g_t) * 0.1,
                                       a_t * 0.1 - 0.5 * 0.1, g_t * 0.1 + 0.5 * 0.1])


def test_commuter_sources(sir):
    rng = np.random.default_rng(0)
    od = ordinates(3)
    n_cells = 4
    fields = ParameterFields.build(sir, n_cells, beta_I=3.0, gamma_I=1.0, lam=2.0, tau=0.25)
    kinetic = KineticState(rng.uniform(0, 1, (2, 3, n_cells, od.n)), rng.uniform(-1, 1, (2, 3, n_cells, od.n)))
    totals = TotalDensities(kinetic.densities(od) + 0.1, sir)
    sources = commuter_sources(sir, kinetic, totals, fields, od)
    # relaxation keeps the density and damps the odd parities
    np.testing.assert_allclose(density_moment(sources.relax_u[0], sources.relax_u[1], od), 0.0, atol=1e-14)
    np.testing.assert_allclose(sources.relax_v, -4.0 * kinetic.v)
    # epidemic sources of the even parities act on the density like the macroscopic reaction
    moment = density_moment(sources.epidemic_u[0], sources.epidemic_u[1], od)
    np.testing.assert_allclose(moment, reaction(sir, kinetic.densities(od), totals, fields), atol=1e-14)
    with pytest.raises(ArgumentError):
        commuter_sources(sir, kinetic, TotalDensities(np.zeros((3, 2)), sir), fields, od)
    with pytest.raises(ArgumentError):
        commuter_sources(sir, kinetic, totals, fields, od, form="other")


def test_odd_parity_source_forms(sir):
    rng = np.random.default_rng(1)
    n_cells, n = 3, 2
    fields = ParameterFields.build(sir, n_cells, beta_I=2.0, gamma_I=0.5, lam=1.5)
    totals = _random_totals(sir, n_cells, rng)
    v = rng.uniform(-1, 1, (2, 3, n_cells, n))
    own = odd_parity_reaction(sir, v, totals, fields, "appendix")
    moment = odd_parity_reaction(sir, v, totals, fields, "moment")
    # with one λ for every compartment the moment form is the reaction of the odd parities
    expected = np.moveaxis(reaction(sir, np.moveaxis(v, 0, 2), totals, fields), 2, 0)
    np.testing.assert_allclose(moment, expected, atol=1e-14)
    # the susceptible source only involves j_S in both forms
    np.testing.assert_allclose(own[:, 0], moment[:, 0], atol=1e-14)
    # the infected source of the appendix form uses j_I as infection argument
    force = 2.0 * totals.I_T[None, :, None]
    np.testing.assert_allclose(own[:, 1], force * v[:, 1] - 0.5 * v[:, 1], atol=1e-14)


def test_moment_form_drops_compartments_without_speed(sir):
    rng = np.random.default_rng(2)
    fields = ParameterFields.build(sir, 2, beta_I=1.0, gamma_I=1.0, lam={"S": 0.0, "I": 1.0, "R": 1.0})
    totals = _random_totals(sir, 2, rng)
    v = rng.uniform(-1, 1, (2, 3, 2, 2))
    out = odd_parity_reaction(sir, v, totals, fields, "moment")
    assert np.all(np.isfinite(out))
    # S has λ = 0: its own source is scaled by λ_S and vanishes, and it feeds nothing into I
    np.testing.assert_allclose(out[:, 0], 0.0)
    np.testing.assert_allclose(out[:, 1], -v[:, 1], atol=1e-14)


def test_urban_rhs(sir):
    fields = ParameterFields.build(sir, 2, beta_I=1.0, gamma_I=0.5, Du=0.1)
    urban = UrbanState(np.array([[1.0, 0.5], [0.2, 0.1], [0.0, 0.0]]))
    totals = TotalDensities(urban.values, sir)
    plain = urban_rhs(sir, urban, totals, fields)
    np.testing.assert_allclose(plain, reaction(sir, urban.values, totals, fields))

    calls = []

    def diffusion(values, D):
        calls.append(values.copy())
        return np.ones_like(values)

    with_diffusion = urban_rhs(sir, urban, totals, fields, diffusion_operator=diffusion)
    np.testing.assert_allclose(with_diffusion, plain + 1.0)
    np.testing.assert_allclose(calls[0], urban.values[0])

    commuters = np.full((3, 2), 7.0)
    urban_rhs(sir, urban, totals, fields, diffusion_operator=diffusion, diffusion_argument="commuter",
              commuter_densities=commuters)
    np.testing.assert_allclose(calls[-1], 7.0)
    with pytest.raises(ArgumentError):
        urban_rhs(sir, urban, totals, fields, diffusion_operator=diffusion, diffusion_argument="commuter")
    with pytest.raises(ArgumentError):
        urban_rhs(sir, urban, totals, fields, diffusion_operator=diffusion, diffusion_argument="both")
