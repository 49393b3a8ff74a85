"""
Finite-volume spatial operators on unstructured meshes.

* second-order CWENO reconstruction (central least-squares stencil blended
  with one-sided two-neighbour stencils through nonlinear weights)
* local Lax-Friedrichs fluxes of the parity transport
* the urban diffusion operator
* zero-flux walls through ghost traces

All kernels work on "cell-major" value tables of shape (K, m): one row per
cell, one column per unknown, so a single reconstruction call serves every
(parity, compartment, node) combination.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .mesh import BOUNDARY, Mesh
from .model import KineticState, ParameterFields, UrbanState
from .ordinates import PARITY_SIGNS, OrdinateSet, VelocityNode

logger = logging.getLogger("KineticEpidemic.Spatial")

CWENO_EPS = 1e-14
CENTRAL_WEIGHT = 0.5


@dataclass(frozen=True, eq=False)
class ReconstructionStencils:
    """Precomputed CWENO stencil geometry of one mesh."""

    neighbors: np.ndarray        # (K, D) real neighbours, -1 elsewhere
    central_weights: np.ndarray  # (K, D, 2): g = Σ_d W[k, d] (u_nb - u_k)
    central_ok: np.ndarray       # (K,)
    pair_cells: np.ndarray       # (K, P, 2) value source per pair slot (own cell for ghosts)
    pair_inverse: np.ndarray     # (K, P, 2, 2), zero for unusable pairs
    linear_central: np.ndarray   # (K,) d_0
    linear_pairs: np.ndarray     # (K, P) d_k
    face_offsets: np.ndarray     # (K, D, 2) edge midpoint - centroid
    face_mask: np.ndarray        # (K, D)
    areas: np.ndarray            # (K,)

    @property
    def n_zero_gradient(self) -> int:
        return int(np.count_nonzero((self.linear_central == 0) & (self.linear_pairs.sum(axis=1) == 0)))


@lru_cache(maxsize=16)
def stencils_for(mesh: Mesh) -> ReconstructionStencils:
    """Build (and cache per mesh) the reconstruction stencils."""
    K = mesh.n_cells
    D = mesh.cell_edges.shape[1]
    valid_slot = mesh.cell_edge_signs != 0
    nb = mesh.cell_neighbors
    real = valid_slot & (nb != BOUNDARY)
    c = mesh.centroids
    e_safe = np.where(valid_slot, mesh.cell_edges, 0)
    mids = mesh.edge_midpoints[e_safe]                                   # (K, D, 2)

    # stencil points: neighbour centroids, or the centroid mirrored across a wall
    normals = mesh.edge_normals[e_safe] * mesh.cell_edge_signs[..., None]
    to_mid = mids - c[:, None, :]
    mirrored = c[:, None, :] + 2.0 * np.sum(to_mid * normals, axis=2, keepdims=True) * normals
    points = np.where(real[..., None], c[np.where(real, nb, 0)], mirrored)
    dx = np.where(valid_slot[..., None], points - c[:, None, :], 0.0)   # (K, D, 2)

    # central least squares over real neighbours
    A = np.where(real[..., None], dx, 0.0)
    AtA = np.einsum("kdi,kdj->kij", A, A)
    det = AtA[:, 0, 0] * AtA[:, 1, 1] - AtA[:, 0, 1] ** 2
    scale = np.einsum("kdi,kdi->k", A, A) ** 2
    central_ok = (real.sum(axis=1) >= 2) & (det > 1e-12 * np.maximum(scale, 1e-300))
    inv = np.zeros_like(AtA)
    safe_det = np.where(central_ok, det, 1.0)
    inv[:, 0, 0] = AtA[:, 1, 1] / safe_det
    inv[:, 1, 1] = AtA[:, 0, 0] / safe_det
    inv[:, 0, 1] = inv[:, 1, 0] = -AtA[:, 0, 1] / safe_det
    inv[~central_ok] = 0.0
    W = np.einsum("kij,kdj->kdi", inv, A)                                 # (K, D, 2)

    # one-sided stencils: consecutive stencil points around the cell
    degree = valid_slot.sum(axis=1)
    slots = np.arange(D)
    first = np.broadcast_to(slots, (K, D))
    second = (first + 1) % np.maximum(degree, 1)[:, None]
    pair_ok = first < degree[:, None]
    pa = np.take_along_axis(dx, first[..., None], axis=1)
    pb = np.take_along_axis(dx, second[..., None], axis=1)
    M = np.stack([pa, pb], axis=2)                                        # (K, P, 2 rows, 2)
    pdet = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    pscale = np.linalg.norm(pa, axis=2) * np.linalg.norm(pb, axis=2)
    pair_ok &= np.abs(pdet) > 1e-10 * np.maximum(pscale, 1e-300)
    psafe = np.where(pair_ok, pdet, 1.0)
    Minv = np.empty_like(M)
    Minv[..., 0, 0] = M[..., 1, 1] / psafe
    Minv[..., 1, 1] = M[..., 0, 0] / psafe
    Minv[..., 0, 1] = -M[..., 0, 1] / psafe
    Minv[..., 1, 0] = -M[..., 1, 0] / psafe
    Minv[~pair_ok] = 0.0

    own = np.arange(K)[:, None]
    source = np.where(real, nb, own)
    pair_cells = np.stack(
        [np.take_along_axis(source, first, axis=1), np.take_along_axis(source, second, axis=1)], axis=2
    )

    n_pairs = pair_ok.sum(axis=1)
    d0 = np.where(central_ok, CENTRAL_WEIGHT, 0.0)
    share = np.where(n_pairs > 0, (1.0 - d0) / np.maximum(n_pairs, 1), 0.0)
    dk = np.where(pair_ok, share[:, None], 0.0)
    # a lone central stencil takes the whole weight
    d0 = np.where(central_ok & (n_pairs == 0), 1.0, d0)

    stencils = ReconstructionStencils(
        neighbors=np.where(real, nb, -1),
        central_weights=W,
        central_ok=central_ok,
        pair_cells=pair_cells,
        pair_inverse=Minv,
        linear_central=d0,
        linear_pairs=dk,
        face_offsets=np.where(valid_slot[..., None], to_mid, 0.0),
        face_mask=valid_slot,
        areas=mesh.areas,
    )
    if stencils.n_zero_gradient:
        logger.warning(f"{stencils.n_zero_gradient} cell(s) have no usable stencil and stay first order")
    return stencils


@dataclass(frozen=True, eq=False)
class CellPolynomial:
    """Linear reconstruction w_k(x) = mean_k + grad_k · (x − c_k)."""

    means: np.ndarray       # (K, m)
    gradients: np.ndarray   # (K, m, 2)
    fallbacks: int = 0

    def edge_traces(self, mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
        """
        Values at edge midpoints seen from the left and the right cell.

        Right traces of boundary edges are copies of the left ones; callers
        apply the wall ghost rule.
        """
        L, R = mesh.edge_left, mesh.edge_right
        mid = mesh.edge_midpoints
        left = self.means[L] + np.einsum("emx,ex->em", self.gradients[L], mid - mesh.centroids[L])
        interior = R != BOUNDARY
        R_safe = np.where(interior, R, L)
        right = self.means[R_safe] + np.einsum("emx,ex->em", self.gradients[R_safe], mid - mesh.centroids[R_safe])
        right = np.where(interior[:, None], right, left)
        return left, right


def cweno_reconstruct(mesh: Mesh, cell_averages, nonnegative=None) -> CellPolynomial:
    """
    Second-order CWENO reconstruction of one or more cell-average fields.

    Args:
        cell_averages: (K, m) values; a (K,) vector is one column
        nonnegative: optional bool (m,) mask of unknowns whose edge
            extrapolations must stay ≥ 0; offending cells fall back to a
            zero gradient for that unknown

    Returns:
        CellPolynomial with gradients (K, m, 2) and the fallback count
    """
    values = np.asarray(cell_averages, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    st = stencils_for(mesh)
    K = values.shape[0]

    nb = np.where(st.neighbors >= 0, st.neighbors, np.arange(K)[:, None])
    delta = values[nb] - values[:, None, :]                                # (K, D, m)
    g_opt = np.einsum("kdx,kdm->kmx", st.central_weights, delta)

    pair_delta = values[st.pair_cells] - values[:, None, None, :]          # (K, P, 2, m)
    g_pairs = np.einsum("kpxy,kpym->kpmx", st.pair_inverse, pair_delta)    # (K, P, m, 2)

    area = st.areas[:, None]
    I_opt = area * np.sum(g_opt ** 2, axis=2)                               # (K, m)
    I_pairs = area[:, None, :] * np.sum(g_pairs ** 2, axis=3)               # (K, P, m)

    d0 = st.linear_central[:, None]
    dk = st.linear_pairs[:, :, None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        g0 = np.where(d0[..., None] > 0,
                      (g_opt - np.einsum("kpm,kpmx->kmx", np.broadcast_to(dk, I_pairs.shape), g_pairs))
                      / np.where(d0 > 0, d0, 1.0)[..., None],
                      0.0)
        a0 = d0 / (CWENO_EPS + I_opt) ** 2
        ak = dk / (CWENO_EPS + I_pairs) ** 2
        total = a0 + ak.sum(axis=1)
        bad = ~np.isfinite(total) | (total <= 0)
        w0 = np.where(bad, d0, a0 / np.where(bad, 1.0, total))
        wk = np.where(bad[:, None, :], dk, ak / np.where(bad, 1.0, total)[:, None, :])
    grad = w0[..., None] * g0 + np.einsum("kpm,kpmx->kmx", wk, g_pairs)

    fallbacks = 0
    if nonnegative is not None:
        mask = np.broadcast_to(np.asarray(nonnegative, dtype=bool), (values.shape[1],))
        if mask.any():
            extrap = values[:, None, :] + np.einsum("kdx,kmx->kdm", st.face_offsets, grad)
            negative = np.any((extrap < 0.0) & st.face_mask[..., None], axis=1)
            negative &= mask[None, :] & np.any(grad != 0.0, axis=2)
            fallbacks = int(np.count_nonzero(negative))
            if fallbacks:
                grad[negative] = 0.0
    return CellPolynomial(values, grad, fallbacks)


def apply_boundary(r_trace: np.ndarray, j_trace: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-flux wall ghost: even parities copied, odd parities negated."""
    return r_trace, -j_trace


def _parity_fluxes(rL, jL, rR, jR, a, s, theta):
    """
    Local Lax-Friedrichs pieces of the (r, j) pair.

    Returns:
        (H_r, central_r, diss_j) with H_j = λ² central_r + diss_j
    """
    H_r = 0.5 * a * (jL + jR) - 0.5 * s * theta * (rR - rL)
    central_r = 0.5 * a * (rL + rR)
    diss_j = -0.5 * s * (jR - jL)
    return H_r, central_r, diss_j


def llf_flux(wL, wR, normal, node: VelocityNode, lambda_c: float,
             parity_sign: float = 1.0, even_weight: float = 1.0) -> Tuple[float, float]:
    """
    Local Lax-Friedrichs flux of one parity pair (r, j).

    The physical fluxes are F_r = a j and F_j = a λ² r with
    a = ξ n_x + s η n_y, s the parity sign; the wave speed bound is
    s_max = λ (|ξ n_x| + |η n_y|).

    Args:
        wL, wR: (r, j) traces left and right of the edge
        normal: unit normal pointing from left to right
        even_weight: scaling of the dissipation applied to r

    Returns:
        (flux of r, flux of j)
    """
    nx, ny = float(normal[0]), float(normal[1])
    a = node.xi * nx + parity_sign * node.eta * ny
    s = lambda_c * (abs(node.xi * nx) + abs(node.eta * ny))
    H_r, central_r, diss_j = _parity_fluxes(wL[0], wL[1], wR[0], wR[1], a, s, even_weight)
    return H_r, lambda_c ** 2 * central_r + diss_j


def _harmonic_mean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where((a > 0) & (b > 0), 2.0 * a * b / np.where(a + b > 0, a + b, 1.0), 0.0)


@lru_cache(maxsize=16)
def _diffusion_geometry(mesh: Mesh):
    interior = mesh.interior_edges
    L = mesh.edge_left[interior]
    R = mesh.edge_right[interior]
    t = mesh.centroids[R] - mesh.centroids[L]
    d = np.linalg.norm(t, axis=1)
    t_hat = t / d[:, None]
    n = mesh.edge_normals[interior]
    return interior, L, R, d, t_hat, n


def urban_diffusion_div(mesh: Mesh, urban_field, D, corrected: bool = True) -> np.ndarray:
    """
    Discrete ∇·(D∇u) with zero flux through walls.

    Interior edge flux: D_e ∇u_e·n |e| with D_e the harmonic mean of the
    adjacent coefficients (0 if either is 0) and
    ∇u_e = ḡ + ((u_R − u_L)/d_LR − ḡ·t̂) t̂, ḡ the mean of the adjacent
    least-squares gradients and t̂ the unit centroid connection. When t̂ is
    the edge normal (or corrected=False) this is the two-point flux
    D_e (u_R − u_L)/d_LR |e|.
    """
    u = np.asarray(urban_field, dtype=float)
    Dc = np.broadcast_to(np.asarray(D, dtype=float), u.shape)
    interior, L, R, d, t_hat, n = _diffusion_geometry(mesh)
    D_e = _harmonic_mean(Dc[L], Dc[R])
    normal_grad = (u[R] - u[L]) / d
    if corrected:
        st = stencils_for(mesh)
        nb = np.where(st.neighbors >= 0, st.neighbors, np.arange(len(u))[:, None])
        g = np.einsum("kdx,kd->kx", st.central_weights, u[nb] - u[:, None])
        g_bar = 0.5 * (g[L] + g[R])
        tn = np.sum(t_hat * n, axis=1)
        normal_grad = np.sum(g_bar * n, axis=1) + (normal_grad - np.sum(g_bar * t_hat, axis=1)) * tn
    flux = D_e * normal_grad * mesh.edge_lengths[interior]
    div = np.bincount(L, weights=flux, minlength=mesh.n_cells)
    div -= np.bincount(R, weights=flux, minlength=mesh.n_cells)
    return div / mesh.areas


@lru_cache(maxsize=16)
def divergence_matrix(mesh: Mesh) -> sp.csr_matrix:
    """(K, E) matrix mapping left-to-right edge fluxes to (1/|P|) Σ outward flux × length."""
    E = mesh.n_edges
    edges = np.arange(E)
    interior = mesh.edge_right != BOUNDARY
    rows = np.concatenate([mesh.edge_left, mesh.edge_right[interior]])
    cols = np.concatenate([edges, edges[interior]])
    vals = np.concatenate([
        mesh.edge_lengths / mesh.areas[mesh.edge_left],
        -mesh.edge_lengths[interior] / mesh.areas[mesh.edge_right[interior]],
    ])
    return sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_cells, E))


@dataclass(frozen=True, eq=False)
class SpatialResidual:
    """Transport / diffusion rates; sources are not included."""

    u: np.ndarray        # (2, C, K, n)
    v: np.ndarray        # (2, C, K, n)
    urban: np.ndarray    # (C, K)
    fallbacks: int = 0


class TransportOperator:
    """
    Parity transport on one mesh with fixed parameter fields.

    The even-parity rate splits into a part linear in the odd parities
    (the flux a·j, evaluated with the implicit weights of the IMEX scheme)
    and the upwind dissipation acting on the even parities.
    """

    def __init__(self, mesh: Mesh, ordinate_set: OrdinateSet, fields: ParameterFields,
                 second_order: bool = True, diffusive_upwinding: bool = True,
                 positivity_guard: bool = True):
        self.mesh = mesh
        self.ordinates = ordinate_set
        self.fields = fields
        self.second_order = second_order
        self.positivity_guard = positivity_guard
        self.div = divergence_matrix(mesh)
        self.fallbacks = 0

        n = ordinate_set.n
        normals = mesh.edge_normals                                       # (E, 2)
        # a[e, p, i] = ξ_i n_x + s_p η_i n_y
        self.a = (normals[:, 0, None, None] * ordinate_set.xi[None, None, :]
                  + normals[:, 1, None, None] * PARITY_SIGNS[None, :, None] * ordinate_set.eta[None, None, :])
        s_geom = (np.abs(normals[:, 0, None] * ordinate_set.xi[None, :])
                  + np.abs(normals[:, 1, None] * ordinate_set.eta[None, :]))  # (E, n)

        L, R = mesh.edge_left, mesh.edge_right
        interior = R != BOUNDARY
        R_safe = np.where(interior, R, L)
        lam = fields.lam                                                  # (C, K)
        lam_e = np.maximum(lam[:, L], lam[:, R_safe])                     # (C, E)
        tau_e = 0.5 * (fields.tau[:, L] + fields.tau[:, R_safe])
        h_e = np.where(
            interior,
            np.linalg.norm(mesh.centroids[R_safe] - mesh.centroids[L], axis=1),
            2.0 * np.linalg.norm(mesh.edge_midpoints - mesh.centroids[L], axis=1),
        )
        if diffusive_upwinding:
            ell = lam_e * tau_e
            theta = (ell / (ell + h_e[None, :])) ** 3
        else:
            theta = np.ones_like(lam_e)
        # broadcast layout (E, parity, C, n)
        self.s = lam_e.T[:, None, :, None] * s_geom[:, None, None, :]
        self.theta = theta.T[:, None, :, None]
        self.a4 = self.a[:, :, None, :]
        self.interior = interior
        self.lambda2_cells = (lam ** 2).T[:, None, :, None]             # (K, 1, C, 1)
        self.shape = (2, fields.lam.shape[0], mesh.n_cells, n)
        self._even_mask = None

    # layout helpers -----------------------------------------------------

    def _to_table(self, x: np.ndarray) -> np.ndarray:
        # (2, C, K, n) -> (K, 2*C*n)
        return np.moveaxis(x, 2, 0).reshape(self.mesh.n_cells, -1)

    def _from_cells(self, table: np.ndarray) -> np.ndarray:
        # (K, 2, C, n) -> (2, C, K, n)
        return np.moveaxis(table.reshape((self.mesh.n_cells,) + self.shape[:2] + self.shape[3:]), 0, 2)

    def _edge_shape(self, x: np.ndarray) -> np.ndarray:
        return x.reshape((self.mesh.n_edges,) + self.shape[:2] + self.shape[3:])

    def _divergence(self, flux: np.ndarray) -> np.ndarray:
        # flux (E, 2, C, n) -> cell table (K, 2, C, n)
        out = self.div @ flux.reshape(self.mesh.n_edges, -1)
        return np.asarray(out).reshape((self.mesh.n_cells,) + flux.shape[1:])

    # traces -------------------------------------------------------------

    def traces(self, x: np.ndarray, nonnegative: bool) -> Tuple[np.ndarray, np.ndarray]:
        """Left/right edge traces (E, 2, C, n) of a parity array (2, C, K, n)."""
        table = self._to_table(x)
        if self.second_order:
            poly = cweno_reconstruct(self.mesh, table, nonnegative=True if nonnegative and self.positivity_guard else None)
            self.fallbacks += poly.fallbacks
        else:
            poly = CellPolynomial(table, np.zeros(table.shape + (2,)))
        left, right = poly.edge_traces(self.mesh)
        return self._edge_shape(left), self._edge_shape(right)

    def even_traces(self, u: np.ndarray):
        rL, rR = self.traces(u, nonnegative=True)
        ghost_r, _ = apply_boundary(rL, 0.0)
        rR = np.where(self.interior[:, None, None, None], rR, ghost_r)
        return rL, rR

    def odd_traces(self, v: np.ndarray):
        jL, jR = self.traces(v, nonnegative=False)
        _, ghost_j = apply_boundary(0.0, jL)
        jR = np.where(self.interior[:, None, None, None], jR, ghost_j)
        return jL, jR

    # rates --------------------------------------------------------------

    def even_flux_rate(self, odd_traces) -> np.ndarray:
        """−div(a·avg(j)): the even-parity rate carried by the odd parities."""
        jL, jR = odd_traces
        flux = 0.5 * self.a4 * (jL + jR)
        return -self._from_cells(self._divergence(flux))

    def even_dissipation_rate(self, even_traces) -> np.ndarray:
        """−div of the upwind dissipation acting on the even parities."""
        rL, rR = even_traces
        flux = -0.5 * self.s * self.theta * (rR - rL)
        return -self._from_cells(self._divergence(flux))

    def odd_rate(self, even_traces, odd_traces) -> np.ndarray:
        """−λ_k² div(a·avg(r)) − div(dissipation of j)."""
        rL, rR = even_traces
        jL, jR = odd_traces
        _, central_r, diss_j = _parity_fluxes(rL, jL, rR, jR, self.a4, self.s, 1.0)
        rate = self.lambda2_cells * self._divergence(central_r) + self._divergence(diss_j)
        return -self._from_cells(rate)

    def gradient_rate(self, even_traces) -> np.ndarray:
        """−div(a·avg(r)) per cell: the transport of r without λ²."""
        rL, rR = even_traces
        return -self._from_cells(self._divergence(0.5 * self.a4 * (rL + rR)))

    def residual(self, kinetic: KineticState, urban: Optional[UrbanState] = None) -> SpatialResidual:
        before = self.fallbacks
        ut = self.even_traces(kinetic.u)
        vt = self.odd_traces(kinetic.v)
        ru = self.even_flux_rate(vt) + self.even_dissipation_rate(ut)
        rv = self.odd_rate(ut, vt)
        if urban is None:
            ur = np.zeros((self.shape[1], self.mesh.n_cells))
        else:
            ur = np.stack([
                urban_diffusion_div(self.mesh, urban.values[c], self.fields.Du[c])
                if np.any(self.fields.Du[c] > 0) else np.zeros(self.mesh.n_cells)
                for c in range(self.shape[1])
            ])
        return SpatialResidual(ru, rv, ur, self.fallbacks - before)


def spatial_residual(mesh: Mesh, kinetic: KineticState, urban: UrbanState, fields: ParameterFields,
                     ordinate_set: OrdinateSet, operator: Optional[TransportOperator] = None) -> SpatialResidual:
    """
    Transport rates of every kinetic unknown and diffusion rates of every
    urban unknown; epidemic sources are left to the integrator.
    """
    op = operator or TransportOperator(mesh, ordinate_set, fields)
    return op.residual(kinetic, urban)
