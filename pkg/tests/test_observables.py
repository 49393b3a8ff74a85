from __future__ import annotations

import numpy as np
import pytest

from kinetic_epidemic.errors import ArgumentError
from kinetic_epidemic.model import CompartmentModel, KineticState, ParameterFields, TotalDensities, UrbanState
from kinetic_epidemic.observables import (
    TimeSeriesRecord,
    compartment_totals,
    integrate,
    r0_seir,
    r0_sir,
    record,
    region_totals,
    regional_r0_estimate,
    relative_drift,
    reproduction_number,
)
from kinetic_epidemic.ordinates import ordinates
from kinetic_epidemic.scenario import build_simulation
from kinetic_epidemic.scenario.presets import preset_test1


def test_integrate(square_mesh):
    ones = np.ones(square_mesh.n_cells)
    assert integrate(square_mesh, ones) == pytest.approx(1.0)
    left = square_mesh.centroids[:, 0] < 0.5
    assert integrate(square_mesh, ones, left) == pytest.approx(0.5)
    stacked = integrate(square_mesh, np.vstack([ones, 2 * ones]))
    np.testing.assert_allclose(stacked, [1.0, 2.0])


def test_compartment_and_region_totals(square_mesh, sir, od2):
    kinetic = KineticState.isotropic(np.array([[0.6], [0.2], [0.0]]) * np.ones(square_mesh.n_cells), od2.n)
    urban = UrbanState(np.array([[0.1], [0.0], [0.1]]) * np.ones(square_mesh.n_cells))
    totals = compartment_totals(kinetic, urban, square_mesh, sir, od2)
    np.testing.assert_allclose(totals.commuters, [0.6, 0.2, 0.0])
    np.testing.assert_allclose(totals.total, [0.7, 0.2, 0.1])
    assert totals.as_dict() == pytest.approx({"S": 0.6, "I": 0.2, "R": 0.0, "S_u": 0.1, "I_u": 0.0, "R_u": 0.1})

    left = square_mesh.centroids[:, 0] < 0.5
    regions = region_totals(kinetic, urban, square_mesh, {"west": left, "none": np.zeros_like(left)}, sir, od2)
    np.testing.assert_allclose(regions["west"].total, [0.35, 0.1, 0.05])
    np.testing.assert_allclose(regions["none"].total, 0.0)
    with pytest.raises(ArgumentError):
        region_totals(kinetic, urban, square_mesh, {"bad": left[:-1]}, sir, od2)


def test_r0_of_uniform_sir(square_mesh, sir):
    n = square_mesh.n_cells
    fields = ParameterFields.build(sir, n, beta_I=3.0, gamma_I=1.5)
    totals = TotalDensities(np.array([[0.8], [0.2], [0.0]]) * np.ones(n), sir)
    assert r0_sir(totals, fields, square_mesh) == pytest.approx(3.0 * 0.8 / 1.5)
    assert reproduction_number(sir, totals, fields, square_mesh) == pytest.approx(1.6)
    saturated = fields.with_values(sir, kappa_I=4.0)
    assert r0_sir(totals, saturated, square_mesh) == pytest.approx(3.0 * 0.8 / (1.0 + 4.0 * 0.2) / 1.5)


def test_r0_is_undefined_without_infected(square_mesh, sir, seir):
    n = square_mesh.n_cells
    totals = TotalDensities(np.vstack([np.ones(n), np.zeros((2, n))]), sir)
    assert r0_sir(totals, ParameterFields.build(sir, n, beta_I=1.0, gamma_I=1.0), square_mesh) is None
    seir_totals = TotalDensities(np.vstack([np.ones(n), np.zeros((3, n))]), seir)
    assert r0_seir(seir_totals, ParameterFields.build(seir, n, beta_I=1.0, gamma_I=1.0, a=1.0), square_mesh) is None


def test_seir_r0_without_asymptomatic_branch(square_mesh, seir):
    n = square_mesh.n_cells
    totals = TotalDensities(np.array([[0.7], [0.1], [0.2], [0.0]]) * np.ones(n), seir)
    fields = ParameterFields.build(seir, n, beta_I=2.0, beta_E=5.0, gamma_I=0.5, a=0.25, gamma_E=0.3,
                                   sigma=1.0, zeta=1.0)
    # ζ = 1: no asymptomatic infections and every exposed progresses, so R0 = ∫F_I/∫ãE · ∫ãE/∫γI
    assert r0_seir(totals, fields, square_mesh) == pytest.approx(2.0 * 0.7 * 0.2 / (0.5 * 0.2))


def test_seir_r0_value(square_mesh, seir):
    n = square_mesh.n_cells
    totals = TotalDensities(np.array([[0.7], [0.1], [0.2], [0.0]]) * np.ones(n), seir)
    fields = ParameterFields.build(seir, n, beta_I=2.0, beta_E=5.0, gamma_I=0.5, a=0.25, gamma_E=0.3,
                                   sigma=0.8, zeta=0.5)
    a_t, g_t = 0.8 * 0.5 * 0.25, 0.5 * 0.3
    exit_rate = (a_t + g_t) * 0.1
    expected = 5.0 * 0.7 * 0.5 * 0.1 / exit_rate + (2.0 * 0.7 * 0.2 / exit_rate) * (a_t * 0.1 / (0.5 * 0.2))
    assert r0_seir(totals, fields, square_mesh) == pytest.approx(expected)


def _test1_r0(beta_tilde):
    sim = build_simulation(preset_test1(beta_tilde=beta_tilde, n=80))
    totals = TotalDensities(sim.kinetic.densities(sim.ordinate_set) + sim.urban.values, sim.model)
    return r0_sir(totals, sim.fields, sim.mesh)


def test_single_outbreak_initial_r0():
    low = _test1_r0(8.0)
    high = _test1_r0(10.0)
    assert low == pytest.approx(0.801, abs=0.005)
    assert high / low == pytest.approx(1.25, rel=1e-12)
    assert low < 1.0


def test_regional_estimate(square_mesh, seir):
    n = square_mesh.n_cells
    totals = TotalDensities(np.array([[2.0], [0.5], [0.5], [1.0]]) * np.ones(n), seir)
    fields = ParameterFields.build(seir, n, beta_I=0.1, a=0.5, gamma_E=0.4, sigma=0.5, zeta=0.5)
    # N = 4, mean exit = 0.125 + 0.2
    assert regional_r0_estimate(fields, totals, square_mesh) == pytest.approx(0.1 * 4.0 / 0.325)
    stalled = fields.with_values(seir, a=0.0, gamma_E=0.0)
    assert regional_r0_estimate(stalled, totals, square_mesh) is None


def test_relative_drift():
    assert relative_drift([1.0, 2.0], [1.5, 1.5]) == 0.0
    assert relative_drift([2.0], [2.2]) == pytest.approx(0.1)
    assert relative_drift([0.0], [0.0]) == 0.0


def test_record(square_mesh, sir, od2):
    n = square_mesh.n_cells
    fields = ParameterFields.build(sir, n, beta_I=2.0, gamma_I=1.0)
    kinetic = KineticState.isotropic(np.array([[0.5], [0.1], [0.0]]) * np.ones(n), od2.n)
    urban = UrbanState(np.array([[0.3], [0.1], [0.0]]) * np.ones(n))
    left = square_mesh.centroids[:, 0] < 0.5
    rec = record(1.5, sir, kinetic, urban, square_mesh, fields, od2, {"west": left})
    assert TimeSeriesRecord.header(sir) == ["t", "S", "I", "R", "S_u", "I_u", "R_u", "R0"]
    row = rec.row()
    assert row[0] == 1.5
    assert row[1:7] == pytest.approx([0.5, 0.1, 0.0, 0.3, 0.1, 0.0])
    assert rec.r0 == pytest.approx(2.0 * 0.8 / 1.0)
    assert rec.region_row("west")[1:] == pytest.approx([0.25, 0.05, 0.0, 0.15, 0.05, 0.0])
    assert len(TimeSeriesRecord.header(CompartmentModel("SEIR"))) == 10


def test_record_without_infected_has_no_r0(square_mesh, sir):
    n = square_mesh.n_cells
    od = ordinates(1)
    kinetic = KineticState.isotropic(np.vstack([np.ones(n), np.zeros((2, n))]), od.n)
    urban = UrbanState(np.zeros((3, n)))
    rec = record(0.0, sir, kinetic, urban, square_mesh, ParameterFields.build(sir, n, gamma_I=1.0), od)
    assert rec.r0 is None
    assert rec.row()[-1] is None
    assert rec.regions == {}


def test_region_totals_that_tile_the_mesh_add_up(square_mesh, sir, od2, densities):
    values = densities(square_mesh)
    kinetic = KineticState.isotropic(0.7 * values, od2.n)
    urban = UrbanState(0.3 * values[::-1])
    x = square_mesh.centroids[:, 0]
    bands = np.digitize(x, [1.0 / 3.0, 2.0 / 3.0])
    masks = {f"band{b}": bands == b for b in range(3)}
    regions = region_totals(kinetic, urban, square_mesh, masks, sir, od2)
    domain = compartment_totals(kinetic, urban, square_mesh, sir, od2)
    assert all(np.any(m) for m in masks.values())
    np.testing.assert_allclose(sum(r.commuters for r in regions.values()), domain.commuters, rtol=1e-12)
    np.testing.assert_allclose(sum(r.urban for r in regions.values()), domain.urban, rtol=1e-12)
    np.testing.assert_allclose(sum(r.total for r in regions.values()), domain.total, rtol=1e-12)


def test_seir_r0_matches_sir_without_latency_split(square_mesh, sir, seir):
    n = square_mesh.n_cells
    x, y = square_mesh.centroids[:, 0], square_mesh.centroids[:, 1]
    S = 0.8 + 0.1 * np.sin(np.pi * x)
    I = 0.05 + 0.04 * x * y
    E = 0.02 + 0.01 * y
    beta = 1.0 + x
    kappa = 0.5 * y
    gamma = 0.4 + 0.2 * x * x
    sir_fields = ParameterFields.build(sir, n, beta_I=beta, kappa_I=kappa, gamma_I=gamma)
    seir_fields = ParameterFields.build(seir, n, beta_I=beta, kappa_I=kappa, gamma_I=gamma,
                                        beta_E=3.0, a=0.3 + 0.2 * y, gamma_E=0.7, sigma=1.0, zeta=1.0)
    sir_totals = TotalDensities(np.vstack([S, I, np.zeros(n)]), sir)
    seir_totals = TotalDensities(np.vstack([S, E, I, np.zeros(n)]), seir)
    expected = r0_sir(sir_totals, sir_fields, square_mesh)
    assert expected is not None
    assert r0_seir(seir_totals, seir_fields, square_mesh) == pytest.approx(expected, rel=1e-12)
    assert reproduction_number(seir, seir_totals, seir_fields, square_mesh) == pytest.approx(expected, rel=1e-12)
