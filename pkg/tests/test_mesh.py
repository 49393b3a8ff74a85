from __future__ import annotations

import numpy as np
import pytest

from kinetic_epidemic.errors import (
    ArgumentError,
    DegenerateCellError,
    IngestionError,
    TopologyError,
    UnsupportedRefinementError,
)
from kinetic_epidemic.mesh import (
    BOUNDARY,
    build_mesh,
    extract_cells,
    locate_cell,
    mesh_size,
    read_mesh_file,
    read_polyline,
    refine_triangles,
    structured_triangulation,
    write_mesh_file,
)

UNIT_SQUARE = np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def test_structured_counts(square_mesh):
    assert square_mesh.n_cells == 72
    assert square_mesh.N_p == 72
    assert square_mesh.n_vertices == 49
    assert square_mesh.n_edges == 42 + 42 + 36
    assert len(square_mesh.boundary_edges) == 24
    assert len(square_mesh.interior_edges) == square_mesh.n_edges - 24
    assert square_mesh.total_area == pytest.approx(1.0)
    assert square_mesh.is_triangular


def test_geometry_is_closed_and_outward(square_mesh):
    mesh = square_mesh
    np.testing.assert_allclose(np.linalg.norm(mesh.edge_normals, axis=1), 1.0)
    assert np.max(mesh.closure_defect()) < 1e-13
    interior = mesh.interior_edges
    to_right = mesh.centroids[mesh.edge_right[interior]] - mesh.centroids[mesh.edge_left[interior]]
    assert np.all(np.sum(to_right * mesh.edge_normals[interior], axis=1) > 0)
    # boundary normals point out of the square
    walls = mesh.boundary_edges
    outward = mesh.edge_midpoints[walls] - mesh.centroids[mesh.edge_left[walls]]
    assert np.all(np.sum(outward * mesh.edge_normals[walls], axis=1) > 0)


def test_every_cell_sees_each_neighbour_once(square_mesh):
    mesh = square_mesh
    for k in range(mesh.n_cells):
        cell = mesh.cell(k)
        assert len(cell.edges) == 3
        assert len(set(cell.neighbors)) == len(cell.neighbors)
        for nb in cell.neighbors:
            assert k in mesh.cell(nb).neighbors


def test_mesh_size_is_largest_diameter(square_mesh):
    assert mesh_size(square_mesh) == pytest.approx(np.sqrt(2.0) / 6.0)
    assert square_mesh.h == pytest.approx(mesh_size(square_mesh))
    np.testing.assert_allclose(square_mesh.inner_sizes, 2.0 * square_mesh.areas / square_mesh.perimeters)


def test_clockwise_cells_are_reoriented():
    mesh = build_mesh(UNIT_SQUARE, [(0, 2, 1), (0, 3, 2)])
    assert np.all(mesh.areas > 0)
    assert mesh.total_area == pytest.approx(1.0)
    assert len(mesh.interior_edges) == 1


def test_polygonal_cells(quad_mesh):
    assert quad_mesh.n_cells == 4
    assert quad_mesh.n_edges == 12
    assert len(quad_mesh.boundary_edges) == 8
    assert not quad_mesh.is_triangular
    np.testing.assert_allclose(quad_mesh.centroids[0], (0.5, 0.5))
    with pytest.raises(UnsupportedRefinementError):
        refine_triangles(quad_mesh, 2)


def test_edge_accessor(square_mesh):
    e = int(square_mesh.boundary_edges[0])
    edge = square_mesh.edge(e)
    assert edge.is_boundary
    assert edge.right_cell == BOUNDARY
    assert edge.length == pytest.approx(square_mesh.edge_lengths[e])


@pytest.mark.parametrize(
    "cells, error",
    [
        ([(0, 1, 1)], DegenerateCellError),
        ([(0, 1, 4)], DegenerateCellError),
        ([(0, 1, 3), (0, 1, 2)], TopologyError),
        ([(0, 1, 9)], ArgumentError),
        ([(0, 1)], ArgumentError),
    ],
)
def test_invalid_meshes(cells, error):
    vertices = np.vstack([UNIT_SQUARE, [(2.0, 0.0)]])
    with pytest.raises(error):
        build_mesh(vertices, cells)


def test_edge_shared_by_three_cells():
    vertices = np.array([(0.0, 0.0), (1.0, 0.0), (0.5, 1.0), (0.5, -1.0), (0.5, 2.0)])
    with pytest.raises(TopologyError):
        build_mesh(vertices, [(0, 1, 2), (1, 0, 3), (0, 1, 4)])


@pytest.mark.parametrize("chi", [2, 3])
def test_refinement_is_nested(coarse_mesh, chi):
    fine = refine_triangles(coarse_mesh, chi)
    assert fine.n_cells == chi * chi * coarse_mesh.n_cells
    assert fine.total_area == pytest.approx(coarse_mesh.total_area)
    assert mesh_size(fine) == pytest.approx(mesh_size(coarse_mesh) / chi)
    counts = np.bincount(fine.base_parent, minlength=coarse_mesh.n_cells)
    assert np.all(counts == chi * chi)
    covered = np.bincount(fine.base_parent, weights=fine.areas)
    np.testing.assert_allclose(covered, coarse_mesh.areas)
    for k in range(0, fine.n_cells, 7):
        assert locate_cell(coarse_mesh, fine.centroids[k]) == fine.base_parent[k]


def test_refinement_keeps_base_parent(coarse_mesh):
    twice = refine_triangles(refine_triangles(coarse_mesh, 2), 2)
    once = refine_triangles(coarse_mesh, 4)
    assert twice.n_cells == once.n_cells
    np.testing.assert_array_equal(np.bincount(twice.base_parent), np.bincount(once.base_parent))


def test_refinement_records_lattice_positions(coarse_mesh):
    fine = refine_triangles(coarse_mesh, 3)
    assert fine.base_factor == 3
    assert fine.base_lattice.shape == (fine.n_cells, 3)
    i, j, flipped = fine.base_lattice.T
    assert np.all(i + j + flipped <= 2)
    assert np.count_nonzero(flipped) == 3 * coarse_mesh.n_cells
    positions = {(int(p), *map(int, q)) for p, q in zip(fine.base_parent, fine.base_lattice)}
    assert len(positions) == fine.n_cells

    same = refine_triangles(fine, 1)
    np.testing.assert_array_equal(same.base_lattice, fine.base_lattice)
    assert same.base_factor == 3
    assert refine_triangles(fine, 2).base_lattice is None
    assert coarse_mesh.base_lattice is None


def test_refine_rejects_bad_factor(coarse_mesh):
    with pytest.raises(ArgumentError):
        refine_triangles(coarse_mesh, 0)


def test_locate_cell(square_mesh):
    for k in (0, 17, 71):
        assert locate_cell(square_mesh, square_mesh.centroids[k]) == k
    assert locate_cell(square_mesh, (1.5, 0.5)) is None
    assert locate_cell(square_mesh, (0.0, 0.0)) is not None


def test_extract_cells(square_mesh):
    keep = square_mesh.centroids[:, 0] < 0.5
    sub = extract_cells(square_mesh, keep)
    assert sub.n_cells == int(keep.sum())
    assert sub.total_area == pytest.approx(0.5)
    with pytest.raises(ArgumentError):
        extract_cells(square_mesh, np.zeros(square_mesh.n_cells, dtype=bool))


def test_structured_triangulation_arguments():
    with pytest.raises(ArgumentError):
        structured_triangulation(0, 1, 0, 1, 0, 2)
    with pytest.raises(ArgumentError):
        structured_triangulation(1, 0, 0, 1, 2, 2)
    with pytest.raises(ArgumentError):
        structured_triangulation(0, 1, 0, 1, 2, 2, "diagonal")


def test_mesh_file_round_trip(tmp_path, quad_mesh):
    path = write_mesh_file(quad_mesh, tmp_path / "quads.mesh")
    back = read_mesh_file(path)
    np.testing.assert_array_equal(back.vertices, quad_mesh.vertices)
    np.testing.assert_allclose(back.areas, quad_mesh.areas)
    assert back.n_edges == quad_mesh.n_edges


def test_mesh_file_errors(tmp_path):
    bad_header = tmp_path / "a.mesh"
    bad_header.write_text("MESH 3 1\n0 0\n1 0\n0 1\n3 0 1 2\n")
    with pytest.raises(IngestionError) as info:
        read_mesh_file(bad_header)
    assert info.value.context["line"] == 1

    short = tmp_path / "b.mesh"
    short.write_text("MESH2D 3 1\n0 0\n1 0\n")
    with pytest.raises(IngestionError):
        read_mesh_file(short)

    bad_cell = tmp_path / "c.mesh"
    bad_cell.write_text("MESH2D 3 1\n0 0\n1 0\n0 1\n4 0 1 2\n")
    with pytest.raises(IngestionError) as info:
        read_mesh_file(bad_cell)
    assert info.value.context["line"] == 5

    degenerate = tmp_path / "d.mesh"
    degenerate.write_text("MESH2D 3 1\n0 0\n1 0\n2 0\n3 0 1 2\n")
    with pytest.raises(IngestionError):
        read_mesh_file(degenerate)

    with pytest.raises(IngestionError):
        read_mesh_file(tmp_path / "missing.mesh")


def test_read_polyline(tmp_path):
    path = tmp_path / "line.txt"
    path.write_text("# a comment\n0 0\n1.5, 2\n\n3 4  # trailing\n")
    np.testing.assert_allclose(read_polyline(path), [(0, 0), (1.5, 2), (3, 4)])
    path.write_text("0 0\n")
    with pytest.raises(IngestionError):
        read_polyline(path)
    path.write_text("0 0\n1 2 3\n")
    with pytest.raises(IngestionError) as info:
        read_polyline(path)
    assert info.value.context["line"] == 2
