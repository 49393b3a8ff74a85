"""Planar geometry helpers used by field builders and region masks."""

from typing import Dict, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ..errors import ArgumentError


def segment_distance(points: np.ndarray, a, b) -> np.ndarray:
    """Distance from every point to the segment [a, b]."""
    p = np.asarray(points, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    length2 = float(d @ d)
    if length2 == 0.0:
        return np.linalg.norm(p - a, axis=-1)
    t = np.clip(((p - a) @ d) / length2, 0.0, 1.0)
    return np.linalg.norm(p - (a + t[..., None] * d), axis=-1)


def polyline_distance(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Distance from every point to a polyline (chain of segments)."""
    line = np.asarray(polyline, dtype=float)
    if line.ndim != 2 or line.shape[0] < 2 or line.shape[1] != 2:
        raise ArgumentError("a polyline needs at least two 2-D points")
    return np.min([segment_distance(points, line[i], line[i + 1]) for i in range(len(line) - 1)], axis=0)


def points_in_polygon(points: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Even-odd rule point-in-polygon test, vectorized over points."""
    p = np.asarray(points, dtype=float)
    poly = np.asarray(polygon, dtype=float)
    if np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    if len(poly) < 3:
        raise ArgumentError("a polygon needs at least three vertices")
    x, y = p[:, 0], p[:, 1]
    inside = np.zeros(len(p), dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < x_cross)
        xj, yj = xi, yi
    return inside


def gaussian(points: np.ndarray, center, width: float) -> np.ndarray:
    """exp(−½ |x − c|² / width²)."""
    if not width > 0:
        raise ArgumentError("Gaussian width must be positive")
    d2 = np.sum((np.asarray(points, dtype=float) - np.asarray(center, dtype=float)) ** 2, axis=-1)
    return np.exp(-0.5 * d2 / width ** 2)


def disc_mask(points: np.ndarray, center, radius: float) -> np.ndarray:
    d = np.linalg.norm(np.asarray(points, dtype=float) - np.asarray(center, dtype=float), axis=-1)
    return d <= radius


def nearest_partition(points: np.ndarray, centers: Sequence, names: Sequence[str]) -> Dict[str, np.ndarray]:
    """Voronoi partition: every point goes to its nearest center."""
    if len(centers) == 0:
        raise ArgumentError("a partition needs at least one center")
    tree = cKDTree(np.asarray(centers, dtype=float))
    _, owner = tree.query(np.asarray(points, dtype=float))
    return {name: owner == i for i, name in enumerate(names)}
