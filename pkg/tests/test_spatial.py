from __future__ import annotations

import numpy as np
import pytest

from kinetic_epidemic.mesh import BOUNDARY
from kinetic_epidemic.model import CompartmentModel, KineticState, ParameterFields, UrbanState
from kinetic_epidemic.ordinates import VelocityNode, ordinates
from kinetic_epidemic.spatial import (
    TransportOperator,
    apply_boundary,
    cweno_reconstruct,
    divergence_matrix,
    llf_flux,
    spatial_residual,
    stencils_for,
    urban_diffusion_div,
)


def _interior_cells(mesh):
    return np.all(mesh.cell_neighbors != BOUNDARY, axis=1)


def _linear(points):
    return 2.0 + 3.0 * points[..., 0] - 1.5 * points[..., 1]


def test_every_cell_has_a_stencil(square_mesh):
    assert stencils_for(square_mesh).n_zero_gradient == 0
    assert np.all(stencils_for(square_mesh).central_ok)


def test_cweno_is_exact_for_linear_fields(square_mesh):
    mesh = square_mesh
    poly = cweno_reconstruct(mesh, _linear(mesh.centroids))
    interior = _interior_cells(mesh)
    np.testing.assert_allclose(poly.gradients[interior, 0], np.tile([3.0, -1.5], (interior.sum(), 1)), atol=1e-10)
    left, right = poly.edge_traces(mesh)
    inner = mesh.edge_right != BOUNDARY
    both_interior = inner & interior[mesh.edge_left] & interior[np.where(inner, mesh.edge_right, 0)]
    exact = _linear(mesh.edge_midpoints)
    np.testing.assert_allclose(left[both_interior, 0], exact[both_interior], atol=1e-10)
    np.testing.assert_allclose(right[both_interior, 0], exact[both_interior], atol=1e-10)


def test_cweno_of_constants_has_no_slope(square_mesh):
    values = np.column_stack([np.full(square_mesh.n_cells, 4.0), np.zeros(square_mesh.n_cells)])
    poly = cweno_reconstruct(square_mesh, values)
    np.testing.assert_allclose(poly.gradients, 0.0, atol=1e-12)
    assert poly.fallbacks == 0


def test_cweno_positivity_guard(square_mesh):
    mesh = square_mesh
    spike = np.zeros(mesh.n_cells)
    spike[int(np.flatnonzero(_interior_cells(mesh))[10])] = 1.0
    unguarded = cweno_reconstruct(mesh, spike)
    left, right = unguarded.edge_traces(mesh)
    assert min(left.min(), right.min()) < 0.0

    guarded = cweno_reconstruct(mesh, spike, nonnegative=True)
    assert guarded.fallbacks > 0
    left, right = guarded.edge_traces(mesh)
    assert min(left.min(), right.min()) >= -1e-14
    # the mask only applies to the flagged columns
    both = cweno_reconstruct(mesh, np.column_stack([spike, spike]), nonnegative=[True, False])
    assert both.fallbacks == guarded.fallbacks


def test_llf_flux_is_consistent():
    node = VelocityNode(zeta=0.0, w=2.0, xi=np.cos(np.pi / 4), eta=np.sin(np.pi / 4))
    normal = (0.6, 0.8)
    a = node.xi * 0.6 - node.eta * 0.8
    H_r, H_j = llf_flux((1.3, 0.4), (1.3, 0.4), normal, node, lambda_c=2.0, parity_sign=-1.0)
    assert H_r == pytest.approx(a * 0.4)
    assert H_j == pytest.approx(4.0 * a * 1.3)


def test_llf_dissipation_opposes_jumps():
    node = VelocityNode(zeta=0.0, w=2.0, xi=1.0, eta=0.0)
    H_r, H_j = llf_flux((1.0, 0.0), (0.0, 0.0), (1.0, 0.0), node, lambda_c=1.0)
    # upwind: the flux of r out of the fuller left state is positive
    assert H_r == pytest.approx(0.5)
    damped, _ = llf_flux((1.0, 0.0), (0.0, 0.0), (1.0, 0.0), node, lambda_c=1.0, even_weight=0.25)
    assert damped == pytest.approx(0.125)
    _, H_j = llf_flux((0.0, 1.0), (0.0, 0.0), (1.0, 0.0), node, lambda_c=1.0)
    assert H_j == pytest.approx(0.5)


def test_wall_ghost():
    r, j = apply_boundary(np.array([1.0, 2.0]), np.array([0.5, -0.5]))
    np.testing.assert_array_equal(r, [1.0, 2.0])
    np.testing.assert_array_equal(j, [-0.5, 0.5])


def test_divergence_of_constant_flux_vanishes(square_mesh):
    flux = square_mesh.edge_normals @ np.array([0.7, -1.1])
    div = divergence_matrix(square_mesh) @ flux
    np.testing.assert_allclose(div, 0.0, atol=1e-12)


def test_urban_diffusion_is_exact_for_linear_fields(square_mesh):
    mesh = square_mesh
    div = urban_diffusion_div(mesh, _linear(mesh.centroids), 0.3)
    interior = _interior_cells(mesh)
    np.testing.assert_allclose(div[interior], 0.0, atol=1e-10)


@pytest.mark.parametrize("corrected", [True, False])
def test_urban_diffusion_conserves_mass(square_mesh, corrected):
    rng = np.random.default_rng(7)
    mesh = square_mesh
    u = rng.uniform(0.0, 1.0, mesh.n_cells)
    D = rng.uniform(0.1, 1.0, mesh.n_cells)
    div = urban_diffusion_div(mesh, u, D, corrected=corrected)
    assert abs(np.dot(mesh.areas, div)) < 1e-13


def test_urban_diffusion_two_point_flux_on_orthogonal_cells(quad_mesh):
    u = np.array([1.0, 0.0, 0.0, 0.0])
    div = urban_diffusion_div(quad_mesh, u, 2.0)
    # unit squares: flux 2 · (0 − 1)/1 · 1 through each of the two interior faces of cell 0
    np.testing.assert_allclose(div, [-4.0, 2.0, 2.0, 0.0], atol=1e-12)


def test_urban_diffusion_zero_coefficient_blocks_exchange(quad_mesh):
    u = np.array([1.0, 0.0, 0.0, 0.0])
    D = np.array([0.0, 1.0, 1.0, 1.0])
    np.testing.assert_allclose(urban_diffusion_div(quad_mesh, u, D), 0.0, atol=1e-14)


def _operator(mesh, n=2, lam=1.5, tau=0.2, **options):
    model = CompartmentModel("SIR")
    od = ordinates(n)
    fields = ParameterFields.build(model, mesh.n_cells, lam=lam, tau=tau)
    return TransportOperator(mesh, od, fields, **options), od, fields


def test_transport_of_uniform_state_vanishes(square_mesh):
    op, od, fields = _operator(square_mesh)
    kinetic = KineticState.isotropic(np.full((3, square_mesh.n_cells), 0.8), od.n)
    res = op.residual(kinetic, UrbanState(np.zeros((3, square_mesh.n_cells))))
    np.testing.assert_allclose(res.u, 0.0, atol=1e-12)
    np.testing.assert_allclose(res.v, 0.0, atol=1e-12)
    np.testing.assert_allclose(res.urban, 0.0)


@pytest.mark.parametrize("second_order", [True, False])
def test_transport_is_conservative(square_mesh, second_order):
    rng = np.random.default_rng(11)
    mesh = square_mesh
    op, od, fields = _operator(mesh, n=3, lam=2.0, second_order=second_order)
    shape = (2, 3, mesh.n_cells, od.n)
    kinetic = KineticState(rng.uniform(0.1, 1.0, shape), rng.uniform(-0.5, 0.5, shape))
    res = op.residual(kinetic)
    # walls let nothing through, every parity and node conserves its integral
    totals = np.einsum("pckn,k->pcn", res.u, mesh.areas)
    np.testing.assert_allclose(totals, 0.0, atol=1e-12)
    totals_v = np.einsum("pckn,k->pcn", res.v, mesh.areas)
    assert np.all(np.isfinite(totals_v))


def test_transport_without_speed_is_still(square_mesh):
    rng = np.random.default_rng(5)
    op, od, _ = _operator(square_mesh, lam=0.0)
    shape = (2, 3, square_mesh.n_cells, od.n)
    kinetic = KineticState(rng.uniform(0.1, 1.0, shape), np.zeros(shape))
    res = op.residual(kinetic)
    np.testing.assert_allclose(res.u, 0.0, atol=1e-14)
    np.testing.assert_allclose(res.v, 0.0, atol=1e-14)


def test_spatial_residual_includes_urban_diffusion(square_mesh):
    model = CompartmentModel("SIR")
    od = ordinates(2)
    fields = ParameterFields.build(model, square_mesh.n_cells, lam=1.0, Du={"S": 0.5})
    x = square_mesh.centroids[:, 0]
    urban = UrbanState(np.stack([np.sin(np.pi * x), np.ones_like(x), np.zeros_like(x)]))
    kinetic = KineticState.isotropic(np.ones((3, square_mesh.n_cells)), od.n)
    res = spatial_residual(square_mesh, kinetic, urban, fields, od)
    np.testing.assert_allclose(res.urban[0], urban_diffusion_div(square_mesh, urban.values[0], 0.5))
    np.testing.assert_allclose(res.urban[1:], 0.0)
