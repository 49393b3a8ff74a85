from __future__ import annotations

import numpy as np
import pytest

from kinetic_epidemic.mesh import build_mesh, structured_triangulation
from kinetic_epidemic.model import CompartmentModel, ParameterFields
from kinetic_epidemic.ordinates import ordinates


@pytest.fixture
def square_mesh():
    """Unit square, 6 × 6 squares cut along alternating diagonals."""
    return structured_triangulation(0.0, 1.0, 0.0, 1.0, 6, 6, "alternate")


@pytest.fixture
def coarse_mesh():
    return structured_triangulation(-1.0, 1.0, -1.0, 1.0, 4, 4, "alternate")


@pytest.fixture
def quad_mesh():
    """2 × 2 unit quads; not triangular."""
    vertices = [(x, y) for y in range(3) for x in range(3)]
    cells = [(0, 1, 4, 3), (1, 2, 5, 4), (3, 4, 7, 6), (4, 5, 8, 7)]
    return build_mesh(np.array(vertices, dtype=float), cells)


@pytest.fixture
def sir():
    return CompartmentModel("SIR")


@pytest.fixture
def seir():
    return CompartmentModel("SEIR")


@pytest.fixture
def od2():
    return ordinates(2)


@pytest.fixture
def sir_fields(sir, square_mesh):
    return ParameterFields.build(sir, square_mesh.n_cells, beta_I=2.0, gamma_I=0.5, lam=1.0, tau=0.5)


def smooth_densities(mesh, n_compartments=3):
    """Positive smooth totals, one row per compartment."""
    x, y = mesh.centroids[:, 0], mesh.centroids[:, 1]
    rows = [1.0 + 0.3 * np.sin(np.pi * x) * np.cos(np.pi * y)]
    rows.append(0.1 + 0.05 * np.cos(np.pi * x))
    rows.extend(0.02 * (1.0 + x * y) for _ in range(n_compartments - 2))
    return np.stack(rows)


@pytest.fixture
def densities():
    return smooth_densities
