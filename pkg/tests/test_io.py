from __future__ import annotations

import json

import numpy as np
import pytest

from kinetic_epidemic.io import (
    RunReport,
    TimeSeriesWriter,
    format_number,
    read_report,
    read_timeseries,
    snapshot_arrays,
    write_vtk,
    write_vtk_snapshot,
)
from kinetic_epidemic.model import KineticState, ParameterFields, UrbanState
from kinetic_epidemic.observables import record


def _state(mesh, model, od):
    x = mesh.centroids[:, 0]
    commuters = np.stack([1.0 - 0.1 * x, 0.1 * x, np.zeros_like(x)])
    return KineticState.isotropic(commuters, od.n), UrbanState(0.5 * commuters)


def _read_with_vtk(path):
    """Points, cell connectivity, cell types and cell arrays as parsed by VTK itself."""
    vtk = pytest.importorskip("vtk")
    from vtk.util.numpy_support import vtk_to_numpy

    reader = vtk.vtkUnstructuredGridReader()
    reader.SetFileName(str(path))
    reader.ReadAllScalarsOn()
    reader.Update()
    grid = reader.GetOutput()
    points = vtk_to_numpy(grid.GetPoints().GetData())
    cells, types = [], []
    for k in range(grid.GetNumberOfCells()):
        cell = grid.GetCell(k)
        cells.append([cell.GetPointId(j) for j in range(cell.GetNumberOfPoints())])
        types.append(grid.GetCellType(k))
    data = grid.GetCellData()
    arrays = {data.GetArrayName(i): vtk_to_numpy(data.GetArray(i)) for i in range(data.GetNumberOfArrays())}
    return points, cells, types, arrays


def test_vtk_header(tmp_path, square_mesh):
    path = write_vtk(square_mesh, {"density": np.ones(square_mesh.n_cells)}, tmp_path / "out" / "a.vtk", title="t=0")
    text = path.read_text().splitlines()
    assert text[0] == "# vtk DataFile Version 2.0"
    assert text[1] == "t=0"
    assert text[2:4] == ["ASCII", "DATASET UNSTRUCTURED_GRID"]
    assert f"CELLS 72 {72 * 4}" in text
    assert "SCALARS density double 1" in text


def test_vtk_read_by_vtk(tmp_path, square_mesh):
    values = np.linspace(0.0, 1.0, square_mesh.n_cells) / 3.0
    points, cells, types, arrays = _read_with_vtk(write_vtk(square_mesh, {"density": values}, tmp_path / "a.vtk"))
    assert points.shape == (49, 3)
    np.testing.assert_allclose(points[:, :2], square_mesh.vertices, rtol=1e-15, atol=0)
    np.testing.assert_array_equal(points[:, 2], 0.0)
    assert types == [5] * 72
    assert cells == [list(c) for c in square_mesh.cell_vertices]
    np.testing.assert_allclose(arrays["density"], values, rtol=1e-15, atol=0)


def test_vtk_polygons(tmp_path, quad_mesh):
    _, cells, types, arrays = _read_with_vtk(write_vtk(quad_mesh, {}, tmp_path / "q.vtk"))
    assert types == [9] * 4
    assert cells == [list(c) for c in quad_mesh.cell_vertices]
    assert arrays == {}


def test_vtk_is_deterministic(tmp_path, square_mesh, sir, od2, sir_fields):
    kinetic, urban = _state(square_mesh, sir, od2)
    a = write_vtk_snapshot(sir, kinetic, urban, square_mesh, tmp_path / "a.vtk", od2, sir_fields)
    b = write_vtk_snapshot(sir, kinetic, urban, square_mesh, tmp_path / "b.vtk", od2, sir_fields)
    assert a.read_bytes() == b.read_bytes()
    names = [line.split()[1] for line in a.read_text().splitlines() if line.startswith("SCALARS")]
    assert set(names) == {
        "S_commuter", "S_urban", "S_total", "I_commuter", "I_urban", "I_total",
        "R_commuter", "R_urban", "R_total", "lambda2_S", "lambda2_I", "lambda2_R", "tau_S", "tau_I", "tau_R",
    }


def test_vtk_snapshot_values(tmp_path, square_mesh, sir, od2, sir_fields):
    kinetic, urban = _state(square_mesh, sir, od2)
    path = write_vtk_snapshot(sir, kinetic, urban, square_mesh, tmp_path / "s.vtk", od2, sir_fields)
    _, _, _, arrays = _read_with_vtk(path)
    assert len(arrays) == 15
    np.testing.assert_allclose(arrays["I_total"], 1.5 * 0.1 * square_mesh.centroids[:, 0])
    np.testing.assert_allclose(arrays["tau_S"], 0.5)


def test_snapshot_arrays_without_fields(square_mesh, seir, od2):
    kinetic = KineticState.isotropic(np.ones((4, square_mesh.n_cells)), od2.n)
    urban = UrbanState(np.zeros((4, square_mesh.n_cells)))
    arrays = snapshot_arrays(seir, kinetic, urban, od2)
    assert len(arrays) == 12
    assert "E_total" in arrays


def test_vtk_rejects_misshaped_arrays(tmp_path, square_mesh):
    with pytest.raises(ValueError):
        write_vtk(square_mesh, {"bad": np.zeros(3)}, tmp_path / "bad.vtk")
    assert not (tmp_path / "bad.vtk").exists()


def test_format_number():
    assert format_number(None) == ""
    assert format_number(0.1) == "0.1"
    assert float(format_number(1.0 / 3.0)) == 1.0 / 3.0


def test_timeseries_files(tmp_path, square_mesh, sir, od2):
    fields = ParameterFields.build(sir, square_mesh.n_cells, beta_I=2.0, gamma_I=1.0)
    kinetic, urban = _state(square_mesh, sir, od2)
    regions = {"West side": square_mesh.centroids[:, 0] < 0.5}
    with TimeSeriesWriter(tmp_path, sir, list(regions)) as writer:
        writer.write(record(0.0, sir, kinetic, urban, square_mesh, fields, od2, regions))
        empty = UrbanState(np.zeros_like(urban.values))
        still = KineticState.isotropic(np.vstack([np.ones((1, square_mesh.n_cells)),
                                                  np.zeros((2, square_mesh.n_cells))]), od2.n)
        writer.write(record(0.5, sir, still, empty, square_mesh, fields, od2, regions))
    assert [p.name for p in writer.paths] == ["timeseries.csv", "West_side.csv"]

    main = read_timeseries(tmp_path / "timeseries.csv")
    assert list(main) == ["t", "S", "I", "R", "S_u", "I_u", "R_u", "R0"]
    assert main["t"] == [0.0, 0.5]
    assert main["I"][0] == pytest.approx(0.05)
    assert main["I_u"][0] == pytest.approx(0.025)
    assert main["R0"][0] is not None
    assert main["R0"][1] is None
    lines = (tmp_path / "timeseries.csv").read_text().splitlines()
    assert lines[2].endswith(",")

    west = read_timeseries(tmp_path / "regions" / "West_side.csv")
    assert "R0" not in west
    assert west["S"][1] == pytest.approx(0.5)


def test_timeseries_without_regions(tmp_path, sir):
    writer = TimeSeriesWriter(tmp_path, sir, ["A"], write_regions=False)
    writer.close()
    assert [p.name for p in writer.paths] == ["timeseries.csv"]
    assert not (tmp_path / "regions").exists()


def test_report_round_trip(tmp_path):
    report = RunReport("demo", steps=12, final_time=2.0, conservation_drift={"total": 1e-15})
    report.warn("R0 undefined at t=1.5")
    report.undefined_r0_times.append(1.5)
    path = report.write_json(tmp_path / "report.json")
    data = json.loads(path.read_text())
    assert data["scenario"] == "demo"
    assert data["warnings"] == ["R0 undefined at t=1.5"]
    back = read_report(path)
    assert back == report
