"""
Discrete ordinates on the first velocity quadrant.

Directions are parametrized by ζ ∈ [−1, 1] through the angle (ζ+1)π/4, so a
Gauss–Legendre rule in ζ yields n directions in the open quadrant. The two
parities of node i travel along (ξ_i, −η_i) and (ξ_i, η_i); the mirrored
directions are represented implicitly through the even/odd split.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np

from .errors import ArgumentError

logger = logging.getLogger("KineticEpidemic.Ordinates")

MAX_NODES = 64
DEFAULT_NODES = 2
NEWTON_TOL = 1e-15
NEWTON_MAX_ITER = 100

# parity index 0 travels along (ξ, −η), parity index 1 along (ξ, +η)
PARITY_SIGNS = np.array([-1.0, 1.0])


def _legendre(n: int, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0 = np.ones_like(x)
    p1 = x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    n-point Gauss–Legendre rule on [−1, 1].

    Args:
        n: number of points, 1 <= n <= 64

    Returns:
        (abscissae ascending, weights)
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_NODES:
        raise ArgumentError(f"Gauss-Legendre order must be an integer in [1, {MAX_NODES}], got {n!r}")
    if n == 1:
        return np.array([0.0]), np.array([2.0])

    i = np.arange(1, n + 1)
    # Chebyshev-like initial guess, descending roots
    x = np.cos(np.pi * (i - 0.25) / (n + 0.5))
    for _ in range(NEWTON_MAX_ITER):
        p, dp = _legendre(n, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= NEWTON_TOL:
            break
    else:
        logger.warning(f"Gauss-Legendre Newton iteration for n={n} hit {NEWTON_MAX_ITER} iterations")
    _, dp = _legendre(n, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce the exact symmetry of the rule
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if n % 2 == 1:
        x[n // 2] = 0.0
    return x, w


@dataclass(frozen=True)
class VelocityNode:
    zeta: float
    w: float
    xi: float
    eta: float


@dataclass(frozen=True, eq=False)
class OrdinateSet:
    """n quadrature directions per quadrant (M = 4n directions overall)."""

    n: int
    zeta: np.ndarray
    weights: np.ndarray
    xi: np.ndarray
    eta: np.ndarray

    @property
    def M(self) -> int:
        return 4 * self.n

    @property
    def nodes(self) -> Tuple[VelocityNode, ...]:
        return tuple(
            VelocityNode(float(z), float(w), float(a), float(b))
            for z, w, a, b in zip(self.zeta, self.weights, self.xi, self.eta)
        )

    def directions(self) -> np.ndarray:
        """(2, n, 2) array of parity directions (ξ, s_p η)."""
        d = np.empty((2, self.n, 2))
        d[:, :, 0] = self.xi[None, :]
        d[:, :, 1] = PARITY_SIGNS[:, None] * self.eta[None, :]
        return d


@lru_cache(maxsize=None)
def ordinates(n: int) -> OrdinateSet:
    """Ordinate set with ξ = cos((ζ+1)π/4), η = sin((ζ+1)π/4)."""
    zeta, w = gauss_legendre(n)
    angle = (zeta + 1.0) * np.pi / 4.0
    od = OrdinateSet(n=n, zeta=zeta, weights=w, xi=np.cos(angle), eta=np.sin(angle))
    for arr in (od.zeta, od.weights, od.xi, od.eta):
        arr.setflags(write=False)
    logger.debug(f"Ordinates n={n}: zeta={zeta.tolist()}, weights={w.tolist()}")
    return od


def density_moment(r1, r2, ordinate_set: OrdinateSet) -> np.ndarray:
    """
    ¼ Σ_i w_i (r1_i + r2_i) over the trailing (node) axis.

    Accepts per-node vectors or any array whose last axis runs over nodes.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    if r1.shape != r2.shape or r1.shape[-1:] != (ordinate_set.n,):
        raise ArgumentError(
            f"parity arrays must share a trailing axis of length {ordinate_set.n}, got {r1.shape} and {r2.shape}"
        )
    return 0.25 * ((r1 + r2) @ ordinate_set.weights)


def flux_moments(j1, j2, ordinate_set: OrdinateSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Macroscopic flux (J_x, J_y) of odd parities, for diagnostics.

    J_x = ¼ Σ w ξ (j⁽¹⁾ + j⁽²⁾), J_y = ¼ Σ w η (j⁽²⁾ − j⁽¹⁾); in the
    diffusion limit this equals −D∇ρ.
    """
    j1 = np.asarray(j1, dtype=float)
    j2 = np.asarray(j2, dtype=float)
    if j1.shape != j2.shape or j1.shape[-1:] != (ordinate_set.n,):
        raise ArgumentError("odd parity arrays do not match the ordinate set")
    w = ordinate_set.weights
    jx = 0.25 * ((j1 + j2) @ (w * ordinate_set.xi))
    jy = 0.25 * ((j2 - j1) @ (w * ordinate_set.eta))
    return jx, jy
