"""
Conforming unstructured meshes

Cells are convex or non-convex simple polygons given counterclockwise; every
interior edge is shared by exactly two cells. Geometry is precomputed once in
flat numpy arrays so the finite-volume kernels can gather and scatter over
edges without Python loops.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import (
    ArgumentError,
    DegenerateCellError,
    IngestionError,
    TopologyError,
    UnsupportedRefinementError,
)

logger = logging.getLogger("KineticEpidemic.Mesh")

BOUNDARY = -1


@dataclass(frozen=True)
class Vertex:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class Edge:
    id: int
    vertices: Tuple[int, int]
    length: float
    unit_normal: Tuple[float, float]
    left_cell: int
    right_cell: int

    @property
    def is_boundary(self) -> bool:
        return self.right_cell == BOUNDARY


@dataclass(frozen=True)
class Cell:
    id: int
    vertices: Tuple[int, ...]
    area: float
    centroid: Tuple[float, float]
    edges: Tuple[int, ...]
    edge_signs: Tuple[int, ...]
    neighbors: Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Immutable tessellation.

    Edge arrays are indexed by edge id, cell arrays by cell id. Padded
    per-cell tables (cell_edges, cell_edge_signs, cell_neighbors) use -1 as
    filler; cell_neighbors is also -1 across boundary edges.
    """

    vertices: np.ndarray            # (V, 2)
    cell_vertices: Tuple[np.ndarray, ...]
    areas: np.ndarray               # (K,)
    centroids: np.ndarray           # (K, 2)
    perimeters: np.ndarray          # (K,)
    diameters: np.ndarray           # (K,)
    edge_vertices: np.ndarray       # (E, 2)
    edge_lengths: np.ndarray        # (E,)
    edge_normals: np.ndarray        # (E, 2), left -> right
    edge_midpoints: np.ndarray      # (E, 2)
    edge_left: np.ndarray           # (E,)
    edge_right: np.ndarray          # (E,), BOUNDARY for walls
    cell_edges: np.ndarray          # (K, maxdeg)
    cell_edge_signs: np.ndarray     # (K, maxdeg), +1 outward, 0 pad
    cell_neighbors: np.ndarray      # (K, maxdeg)
    base_parent: Optional[np.ndarray] = field(default=None)
    # (K, 3) sub-triangle (i, j, flipped) in the chi-lattice of the base cell; None when unknown
    base_lattice: Optional[np.ndarray] = field(default=None)
    base_factor: int = 1

    @property
    def n_cells(self) -> int:
        return len(self.areas)

    @property
    def N_p(self) -> int:
        return self.n_cells

    @property
    def n_edges(self) -> int:
        return len(self.edge_lengths)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_right != BOUNDARY)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_right == BOUNDARY)

    @property
    def h(self) -> float:
        return mesh_size(self)

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    @property
    def is_triangular(self) -> bool:
        return all(len(v) == 3 for v in self.cell_vertices)

    @property
    def inner_sizes(self) -> np.ndarray:
        """Incircle-like size 2·area/perimeter per cell."""
        return 2.0 * self.areas / self.perimeters

    def vertex(self, i: int) -> Vertex:
        x, y = self.vertices[i]
        return Vertex(int(i), float(x), float(y))

    def edge(self, e: int) -> Edge:
        return Edge(
            id=int(e),
            vertices=(int(self.edge_vertices[e, 0]), int(self.edge_vertices[e, 1])),
            length=float(self.edge_lengths[e]),
            unit_normal=(float(self.edge_normals[e, 0]), float(self.edge_normals[e, 1])),
            left_cell=int(self.edge_left[e]),
            right_cell=int(self.edge_right[e]),
        )

    def cell(self, k: int) -> Cell:
        deg = len(self.cell_vertices[k])
        return Cell(
            id=int(k),
            vertices=tuple(int(v) for v in self.cell_vertices[k]),
            area=float(self.areas[k]),
            centroid=(float(self.centroids[k, 0]), float(self.centroids[k, 1])),
            edges=tuple(int(e) for e in self.cell_edges[k, :deg]),
            edge_signs=tuple(int(s) for s in self.cell_edge_signs[k, :deg]),
            neighbors=tuple(int(n) for n in self.cell_neighbors[k, :deg] if n != BOUNDARY),
        )

    def closure_defect(self) -> np.ndarray:
        """Per-cell |Σ edge length × outward normal|; zero for closed cells."""
        valid = self.cell_edge_signs != 0
        e = np.where(valid, self.cell_edges, 0)
        weighted = (self.edge_lengths[e] * self.cell_edge_signs)[..., None] * self.edge_normals[e]
        return np.linalg.norm(weighted.sum(axis=1), axis=1)

    def check(self) -> None:
        """Assert conformity and geometric conservation."""
        interior = self.edge_right != BOUNDARY
        if np.any(self.edge_left == self.edge_right):
            raise TopologyError("edge with identical left and right cell")
        counts = np.bincount(self.edge_left, minlength=self.n_cells)
        counts += np.bincount(self.edge_right[interior], minlength=self.n_cells)
        degrees = np.array([len(v) for v in self.cell_vertices])
        if np.any(counts != degrees):
            raise TopologyError("edge/cell incidence does not match cell degrees")
        scale = max(float(np.ptp(self.vertices, axis=0).max()), 1.0)
        if np.any(self.closure_defect() > 1e-12 * scale):
            raise TopologyError("cell boundary is not closed")


def _signed_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _centroid(points: np.ndarray, area: float) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    return np.array([np.dot(x + xn, cross), np.dot(y + yn, cross)]) / (6.0 * area)


def build_mesh(vertices, cell_vertex_lists, base_parent: Optional[np.ndarray] = None,
               base_lattice: Optional[np.ndarray] = None, base_factor: int = 1) -> Mesh:
    """
    Build the full topology of a tessellation.

    Args:
        vertices: (V, 2) coordinates
        cell_vertex_lists: per-cell vertex index lists, any orientation
        base_parent: optional (K,) ids of the base-mesh cell each cell descends from
        base_lattice: optional (K, 3) sub-triangle (i, j, flipped) in the parent lattice
        base_factor: refinement factor that base_lattice refers to

    Returns:
        Mesh with areas, centroids, edges, adjacency and outward normals;
        clockwise cells are reoriented.
    """
    verts = np.asarray(vertices, dtype=float)
    if verts.ndim != 2 or verts.shape[1] != 2:
        raise ArgumentError("vertices must be an (n, 2) array")
    if not np.all(np.isfinite(verts)):
        raise ArgumentError("vertex coordinates must be finite")
    n_vertices = len(verts)

    cells: List[np.ndarray] = []
    areas, centroids, perimeters, diameters = [], [], [], []
    for k, raw in enumerate(cell_vertex_lists):
        ids = np.asarray(raw, dtype=np.int64)
        if ids.ndim != 1 or len(ids) < 3:
            raise ArgumentError(f"cell {k} needs at least 3 vertices")
        if ids.min() < 0 or ids.max() >= n_vertices:
            raise ArgumentError(f"cell {k} references a vertex outside 0..{n_vertices - 1}")
        if len(np.unique(ids)) != len(ids):
            raise DegenerateCellError(f"cell {k} repeats a vertex", cell=k)
        pts = verts[ids]
        area = _signed_area(pts)
        diffs = pts[:, None, :] - pts[None, :, :]
        diameter = float(np.sqrt((diffs ** 2).sum(axis=2)).max())
        if abs(area) <= 1e-14 * diameter ** 2:
            raise DegenerateCellError(f"cell {k} has zero area", cell=k)
        if area < 0:
            ids = ids[::-1].copy()
            pts = verts[ids]
            area = -area
        cells.append(ids)
        areas.append(area)
        centroids.append(_centroid(pts, area))
        perimeters.append(float(np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1).sum()))
        diameters.append(diameter)

    if not cells:
        raise ArgumentError("a mesh needs at least one cell")

    edge_index: Dict[Tuple[int, int], int] = {}
    edge_vertices, edge_left, edge_right = [], [], []
    max_deg = max(len(c) for c in cells)
    cell_edges = np.full((len(cells), max_deg), BOUNDARY, dtype=np.int64)
    cell_signs = np.zeros((len(cells), max_deg), dtype=np.int64)

    for k, ids in enumerate(cells):
        for local, (a, b) in enumerate(zip(ids, np.roll(ids, -1))):
            key = (min(a, b), max(a, b))
            e = edge_index.get(key)
            if e is None:
                e = len(edge_vertices)
                edge_index[key] = e
                edge_vertices.append((int(a), int(b)))
                edge_left.append(k)
                edge_right.append(BOUNDARY)
                sign = 1
            else:
                if edge_right[e] != BOUNDARY:
                    raise TopologyError(f"edge {key} shared by more than two cells", edge=list(key))
                if edge_vertices[e] != (int(b), int(a)):
                    raise TopologyError(
                        f"cells {edge_left[e]} and {k} traverse edge {key} in the same direction "
                        "(overlapping or inconsistent adjacency)",
                        edge=list(key),
                    )
                edge_right[e] = k
                sign = -1
            cell_edges[k, local] = e
            cell_signs[k, local] = sign

    ev = np.array(edge_vertices, dtype=np.int64)
    tangent = verts[ev[:, 1]] - verts[ev[:, 0]]
    lengths = np.linalg.norm(tangent, axis=1)
    # outward normal of the left cell, whose counterclockwise walk goes v0 -> v1
    normals = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]
    left = np.array(edge_left, dtype=np.int64)
    right = np.array(edge_right, dtype=np.int64)

    neighbors = np.full_like(cell_edges, BOUNDARY)
    valid = cell_signs != 0
    e_safe = np.where(valid, cell_edges, 0)
    other = np.where(cell_signs > 0, right[e_safe], left[e_safe])
    neighbors[valid] = other[valid]

    mesh = Mesh(
        vertices=verts,
        cell_vertices=tuple(cells),
        areas=np.array(areas),
        centroids=np.array(centroids),
        perimeters=np.array(perimeters),
        diameters=np.array(diameters),
        edge_vertices=ev,
        edge_lengths=lengths,
        edge_normals=normals,
        edge_midpoints=0.5 * (verts[ev[:, 0]] + verts[ev[:, 1]]),
        edge_left=left,
        edge_right=right,
        cell_edges=cell_edges,
        cell_edge_signs=cell_signs,
        cell_neighbors=neighbors,
        base_parent=None if base_parent is None else np.asarray(base_parent, dtype=np.int64),
        base_lattice=None if base_lattice is None else np.asarray(base_lattice, dtype=np.int64).reshape(-1, 3),
        base_factor=int(base_factor),
    )
    mesh.check()
    logger.debug(f"Built mesh: {mesh.n_cells} cells, {mesh.n_edges} edges, {len(mesh.boundary_edges)} on the boundary")
    return mesh


def refine_triangles(mesh: Mesh, chi: int) -> Mesh:
    """
    Uniform barycentric subdivision of every triangle into chi² sub-triangles.

    Points on parent edges are shared between the two parents, so the result
    is conforming. The returned mesh records, per cell, the cell of the
    unrefined base mesh it descends from (base_parent). Refining a base mesh
    also records the sub-triangle position in the parent lattice
    (base_lattice, base_factor) so that two refinements of one base can be
    matched cell by cell.
    """
    if not isinstance(chi, (int, np.integer)) or chi < 1:
        raise ArgumentError(f"refinement factor must be a positive integer, got {chi!r}")
    if not mesh.is_triangular:
        raise UnsupportedRefinementError("refine_triangles needs an all-triangular mesh")
    from_base = mesh.base_parent is None
    parents = np.arange(mesh.n_cells) if from_base else mesh.base_parent
    if chi == 1:
        positions = np.zeros((mesh.n_cells, 3), dtype=np.int64) if from_base else mesh.base_lattice
        return build_mesh(mesh.vertices, mesh.cell_vertices, base_parent=parents,
                          base_lattice=positions, base_factor=1 if from_base else mesh.base_factor)

    points: List[np.ndarray] = [p for p in mesh.vertices]
    edge_points: Dict[Tuple[int, int], List[int]] = {}

    def edge_point(a: int, b: int, k: int) -> int:
        # point k/chi of the way from a to b, shared through the canonical (min, max) key
        if k == 0:
            return a
        if k == chi:
            return b
        lo, hi = (a, b) if a < b else (b, a)
        t = k if a < b else chi - k
        ids = edge_points.get((lo, hi))
        if ids is None:
            ids = []
            p0, p1 = mesh.vertices[lo], mesh.vertices[hi]
            for s in range(1, chi):
                ids.append(len(points))
                points.append(p0 + (s / chi) * (p1 - p0))
            edge_points[(lo, hi)] = ids
        return ids[t - 1]

    new_cells: List[Tuple[int, int, int]] = []
    new_parents: List[int] = []
    new_lattice: List[Tuple[int, int, int]] = []
    for k, (v0, v1, v2) in enumerate(mesh.cell_vertices):
        p0, p1, p2 = mesh.vertices[v0], mesh.vertices[v1], mesh.vertices[v2]
        lattice: Dict[Tuple[int, int], int] = {}
        for i in range(chi + 1):
            for j in range(chi + 1 - i):
                if j == 0:
                    lattice[i, j] = edge_point(v0, v1, i)
                elif i == 0:
                    lattice[i, j] = edge_point(v0, v2, j)
                elif i + j == chi:
                    lattice[i, j] = edge_point(v1, v2, j)
                else:
                    lattice[i, j] = len(points)
                    points.append(p0 + (i / chi) * (p1 - p0) + (j / chi) * (p2 - p0))
        for i in range(chi):
            for j in range(chi - i):
                new_cells.append((lattice[i, j], lattice[i + 1, j], lattice[i, j + 1]))
                new_lattice.append((i, j, 0))
                if i + j < chi - 1:
                    new_cells.append((lattice[i + 1, j], lattice[i + 1, j + 1], lattice[i, j + 1]))
                    new_lattice.append((i, j, 1))
        new_parents.extend([parents[k]] * (chi * chi))

    # lattice positions only stay meaningful one level below the base mesh
    refined = build_mesh(np.array(points), new_cells, base_parent=np.array(new_parents),
                         base_lattice=np.array(new_lattice) if from_base else None,
                         base_factor=chi if from_base else 1)
    logger.info(f"Refined mesh by chi={chi}: {mesh.n_cells} -> {refined.n_cells} cells")
    return refined


def mesh_size(mesh: Mesh) -> float:
    """Maximum cell diameter (longest vertex-to-vertex distance)."""
    return float(mesh.diameters.max())


def _point_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / np.dot(ab, ab), 0.0, 1.0)
    return float(np.linalg.norm(a + t * ab - p)) <= tol


def _point_in_polygon(p: np.ndarray, pts: np.ndarray, tol: float) -> bool:
    n = len(pts)
    for i in range(n):
        if _point_on_segment(p, pts[i], pts[(i + 1) % n], tol):
            return True
    x, y = p
    inside = False
    for i in range(n):
        (x0, y0), (x1, y1) = pts[i], pts[(i + 1) % n]
        if (y0 > y) != (y1 > y):
            if x < x0 + (y - y0) * (x1 - x0) / (y1 - y0):
                inside = not inside
    return inside


def locate_cell(mesh: Mesh, point) -> Optional[int]:
    """
    Cell containing a point, boundary inclusive; the lowest cell id wins on
    shared edges and vertices. None outside the domain.
    """
    p = np.asarray(point, dtype=float)
    scale = max(float(np.ptp(mesh.vertices, axis=0).max()), 1.0)
    tol = 1e-12 * scale
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    if np.any(p < lo - tol) or np.any(p > hi + tol):
        return None
    # candidates: cells whose centroid is within one diameter of the point
    dist = np.linalg.norm(mesh.centroids - p, axis=1)
    for k in np.flatnonzero(dist <= mesh.diameters + tol):
        if _point_in_polygon(p, mesh.vertices[mesh.cell_vertices[k]], tol):
            return int(k)
    return None


def structured_triangulation(xmin: float, xmax: float, ymin: float, ymax: float,
                             nx: int, ny: int, diagonal: str = "right") -> Mesh:
    """
    Rectangle split into nx × ny squares, each cut into two triangles.

    Args:
        diagonal: "right" (bottom-left to top-right), "left", or "alternate"
            (checkerboard of both directions)
    """
    if nx < 1 or ny < 1:
        raise ArgumentError("nx and ny must be positive")
    if not (xmax > xmin and ymax > ymin):
        raise ArgumentError("empty rectangle")
    if diagonal not in ("right", "left", "alternate"):
        raise ArgumentError(f"unknown diagonal pattern {diagonal!r}")
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    cells = []
    for j in range(ny):
        for i in range(nx):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            right = diagonal == "right" or (diagonal == "alternate" and (i + j) % 2 == 0)
            if right:
                cells.append((a, b, c))
                cells.append((a, c, d))
            else:
                cells.append((a, b, d))
                cells.append((b, c, d))
    return build_mesh(vertices, cells)


def extract_cells(mesh: Mesh, keep: np.ndarray) -> Mesh:
    """Sub-mesh made of the selected cells, with unused vertices dropped."""
    keep = np.asarray(keep)
    ids = np.flatnonzero(keep) if keep.dtype == bool else keep.astype(np.int64)
    if len(ids) == 0:
        raise ArgumentError("cell selection is empty")
    used = np.unique(np.concatenate([mesh.cell_vertices[k] for k in ids]))
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return build_mesh(mesh.vertices[used], [remap[mesh.cell_vertices[k]] for k in ids])


def read_mesh_file(path: Union[str, Path]) -> Mesh:
    """
    Read the text mesh format:

        MESH2D <n_vertices> <n_cells>
        x y                      (n_vertices lines)
        k v1 ... vk              (n_cells lines, 0-based)
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IngestionError(f"cannot read mesh file: {e}", path=str(path))
    body = [(n + 1, ln.split()) for n, ln in enumerate(lines) if ln.strip() and not ln.lstrip().startswith("#")]
    if not body or body[0][1][0] != "MESH2D" or len(body[0][1]) != 3:
        raise IngestionError("expected header 'MESH2D <n_vertices> <n_cells>'", path=str(path), line=body[0][0] if body else 1)
    try:
        n_vertices, n_cells = int(body[0][1][1]), int(body[0][1][2])
    except ValueError:
        raise IngestionError("header counts must be integers", path=str(path), line=body[0][0])
    if len(body) < 1 + n_vertices + n_cells:
        raise IngestionError("file ends before all vertices and cells were read", path=str(path), line=len(lines))
    vertices = []
    for line_no, tokens in body[1:1 + n_vertices]:
        try:
            if len(tokens) != 2:
                raise ValueError
            vertices.append((float(tokens[0]), float(tokens[1])))
        except ValueError:
            raise IngestionError("vertex line must be 'x y'", path=str(path), line=line_no)
    cells = []
    for line_no, tokens in body[1 + n_vertices:1 + n_vertices + n_cells]:
        try:
            k = int(tokens[0])
            ids = [int(t) for t in tokens[1:]]
            if len(ids) != k:
                raise ValueError
        except (ValueError, IndexError):
            raise IngestionError("cell line must be 'k v1 ... vk'", path=str(path), line=line_no)
        cells.append(ids)
    try:
        return build_mesh(vertices, cells)
    except (ArgumentError, TopologyError, DegenerateCellError) as e:
        raise IngestionError(f"invalid mesh: {e.message}", path=str(path))


def write_mesh_file(mesh: Mesh, path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"MESH2D {mesh.n_vertices} {mesh.n_cells}\n")
        for x, y in mesh.vertices:
            f.write(f"{float(x)!r} {float(y)!r}\n")
        for ids in mesh.cell_vertices:
            f.write(f"{len(ids)} " + " ".join(str(int(v)) for v in ids) + "\n")
    return path


def read_polyline(path: Union[str, Path]) -> np.ndarray:
    """Read one 'x y' pair per line; '#' starts a comment."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise IngestionError(f"cannot read polyline: {e}", path=str(path))
    pts = []
    for n, ln in enumerate(lines, start=1):
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        tokens = ln.replace(",", " ").split()
        try:
            if len(tokens) != 2:
                raise ValueError
            pts.append((float(tokens[0]), float(tokens[1])))
        except ValueError:
            raise IngestionError("polyline line must be 'x y'", path=str(path), line=n)
    if len(pts) < 2:
        raise IngestionError("polyline needs at least two points", path=str(path))
    return np.array(pts)
