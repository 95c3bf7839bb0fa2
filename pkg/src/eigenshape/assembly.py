"""Stiffness and mass assembly for the vector eigenproblem on triangle meshes.

Lagrange elements of order 1 or 2 with exact-degree Gauss quadrature, so no
quadrature error enters convergence studies.  Dirichlet conditions are
imposed by eliminating constrained rows and columns, which keeps both
matrices symmetric with clean spectra.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coeff import CoefficientTensor, legendre_hadamard_constant
from .geometry import Mesh

DIRICHLET = "dirichlet"
NEUMANN = "neumann"

ELLIPTICITY_FLOOR = 1e-12

# Symmetric Gauss rules on the reference triangle, barycentric points and
# weights summing to one.  Degree 2: edge midpoints.  Degree 4: Dunavant.
_RULE_DEG2 = (
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.array([1.0, 1.0, 1.0]) / 3.0,
)
_D4A, _D4B = 0.816847572980459, 0.091576213509771
_D4C, _D4D = 0.108103018168070, 0.445948490915965
_RULE_DEG4 = (
    np.array(
        [
            [_D4A, _D4B, _D4B],
            [_D4B, _D4A, _D4B],
            [_D4B, _D4B, _D4A],
            [_D4C, _D4D, _D4D],
            [_D4D, _D4C, _D4D],
            [_D4D, _D4D, _D4C],
        ]
    ),
    np.array([0.109951743655322] * 3 + [0.223381589678011] * 3),
)

_GAUSS2_S = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


class EllipticityError(ValueError):
    """Coefficient tensor failed the rank-one positivity requirement."""


def _shape_values(order: int, bary: np.ndarray) -> np.ndarray:
    """Shape function values at barycentric points; rows = points, cols = local nodes."""
    lam = np.atleast_2d(bary)
    if order == 1:
        return lam.copy()
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l1 * l2,
            4 * l2 * l0,
            4 * l0 * l1,
        ]
    )


def _shape_grads_bary(order: int, bary: np.ndarray) -> np.ndarray:
    """d(shape)/d(lambda) at barycentric points: (n_points, n_local, 3)."""
    lam = np.atleast_2d(bary)
    npts = lam.shape[0]
    if order == 1:
        return np.broadcast_to(np.eye(3), (npts, 3, 3)).copy()
    out = np.zeros((npts, 6, 3))
    for v in range(3):
        out[:, v, v] = 4 * lam[:, v] - 1
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    out[:, 3, 1] = 4 * l2
    out[:, 3, 2] = 4 * l1
    out[:, 4, 2] = 4 * l0
    out[:, 4, 0] = 4 * l2
    out[:, 5, 0] = 4 * l1
    out[:, 5, 1] = 4 * l0
    return out


def _barycentric_gradients(nodes, triangles):
    """Constant gradients of the barycentric coordinates: (T, 3, 2), plus areas."""
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    twoa = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    grad = np.empty((len(triangles), 3, 2))
    for c in range(3):
        pj = p[:, (c + 1) % 3]
        pk = p[:, (c + 2) % 3]
        grad[:, c, 0] = pj[:, 1] - pk[:, 1]
        grad[:, c, 1] = pk[:, 0] - pj[:, 0]
    grad /= twoa[:, None, None]
    return grad, 0.5 * twoa


@dataclass
class DofMap:
    """Node/component layout of the discrete space.

    points holds the coordinates of all interpolation points (geometric
    nodes first, then mid-edge points for order 2); tri_points lists the
    local-to-global point ids per triangle.  free_index maps (point,
    component) to a free degree of freedom, -1 where constrained.
    """

    bc: str
    order: int
    n_components: int
    points: np.ndarray
    tri_points: np.ndarray
    free_index: np.ndarray
    n_free: int
    boundary_point_ids: np.ndarray
    boundary_edge_mid_ids: np.ndarray | None

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Reinstate constrained entries as zeros: full vector of length P * m."""
        u_free = np.asarray(u_free, dtype=float)
        if u_free.shape != (self.n_free,):
            raise ValueError(f"expected free vector of length {self.n_free}")
        full = np.zeros(len(self.points) * self.n_components)
        flat = self.free_index.reshape(-1)
        full[flat >= 0] = u_free[flat[flat >= 0]]
        return full

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        """Drop constrained entries from a full vector."""
        u_full = np.asarray(u_full, dtype=float)
        flat = self.free_index.reshape(-1)
        out = np.zeros(self.n_free)
        out[flat[flat >= 0]] = u_full[flat >= 0]
        return out


@dataclass
class SystemMatrices:
    """Assembled stiffness K and mass M restricted to free dofs."""

    K: sp.csr_matrix
    M: sp.csr_matrix
    dofmap: DofMap

    @property
    def n_free(self) -> int:
        return self.dofmap.n_free


def _build_dofmap(mesh: Mesh, m: int, bc: str, order: int) -> DofMap:
    nodes, tris = mesh.nodes, mesh.triangles
    n_geo = len(nodes)
    if order == 1:
        points = nodes
        tri_points = tris.copy()
        mid_ids = None
        boundary_pts = mesh.boundary_node_indices()
    else:
        # Mid-edge points numbered by lexicographic (min, max) node pair; the
        # local slot 3 + loc sits opposite vertex loc.
        opposite = np.stack([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]], axis=1)
        keys = np.sort(opposite.reshape(-1, 2), axis=1)
        unique_edges, inverse = np.unique(keys, axis=0, return_inverse=True)
        tri_points = np.empty((len(tris), 6), dtype=np.int64)
        tri_points[:, :3] = tris
        tri_points[:, 3:] = n_geo + inverse.reshape(-1, 3)
        points = np.vstack([nodes, 0.5 * (nodes[unique_edges[:, 0]] + nodes[unique_edges[:, 1]])])
        bkeys = np.sort(mesh.boundary_nodes, axis=1)
        locate = np.searchsorted(
            unique_edges[:, 0] * (len(nodes) + 1) + unique_edges[:, 1],
            bkeys[:, 0] * (len(nodes) + 1) + bkeys[:, 1],
        )
        mid_ids = n_geo + locate.astype(np.int64)
        boundary_pts = np.unique(np.concatenate([mesh.boundary_node_indices(), mid_ids]))

    n_points = len(points)
    constrained = np.zeros(n_points, dtype=bool)
    if bc == DIRICHLET:
        constrained[boundary_pts] = True
    free_index = np.full((n_points, m), -1, dtype=np.int64)
    free_points = np.flatnonzero(~constrained)
    order_ids = (free_points[:, None] * m + np.arange(m)).reshape(-1)
    free_index.reshape(-1)[order_ids] = np.arange(len(order_ids))
    return DofMap(
        bc=bc,
        order=order,
        n_components=m,
        points=points,
        tri_points=tri_points,
        free_index=free_index,
        n_free=len(order_ids),
        boundary_point_ids=boundary_pts,
        boundary_edge_mid_ids=mid_ids,
    )


def assemble(mesh: Mesh, tensor: CoefficientTensor, bc: str, order: int = 2) -> SystemMatrices:
    """Assemble K and M for the weak eigenproblem with the given conditions.

    Refuses tensors whose rank-one ellipticity constant is at or below
    ELLIPTICITY_FLOOR and meshes with nonpositive triangles.
    """
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError(f"bc must be {DIRICHLET!r} or {NEUMANN!r}, got {bc!r}")
    if order not in (1, 2):
        raise ValueError("element order must be 1 or 2")
    if legendre_hadamard_constant(tensor) <= ELLIPTICITY_FLOOR:
        raise EllipticityError("coefficient tensor is not elliptic (rank-one constant <= 1e-12)")
    areas = mesh.signed_areas()
    if len(areas) == 0 or np.min(areas) <= 0:
        raise ValueError("mesh has no triangles or contains nonpositive triangles")

    m = tensor.m
    dofmap = _build_dofmap(mesh, m, bc, order)
    grad_l, areas = _barycentric_gradients(mesh.nodes, mesh.triangles)
    bary, weights = _RULE_DEG2 if order == 1 else _RULE_DEG4
    values = _shape_values(order, bary)
    grads_b = _shape_grads_bary(order, bary)

    # Elements are affine, so the quadrature sums collapse into constant
    # reference tensors; the rules are exact for the polynomial degrees, so
    # these are the exact reference integrals.
    ref_k = np.einsum("x,xpc,xqd->pcqd", weights, grads_b, grads_b)
    ref_m = np.einsum("x,xp,xq->pq", weights, values, values)

    n_loc = 3 if order == 1 else 6
    n_tri = mesh.n_triangles
    k_loc = np.einsum(
        "ijab,pcqd,tca,tdb,t->tpiqj", tensor.entries, ref_k, grad_l, grad_l, areas,
        optimize=True,
    )
    m_loc = areas[:, None, None] * ref_m
    k_loc = k_loc.reshape(n_tri, n_loc * m, n_loc * m)
    k_loc = 0.5 * (k_loc + k_loc.transpose(0, 2, 1))
    m_full = np.einsum("tpq,ij->tpiqj", m_loc, np.eye(m)).reshape(n_tri, n_loc * m, n_loc * m)

    dofs = (dofmap.tri_points[:, :, None] * m + np.arange(m)).reshape(n_tri, n_loc * m)
    rows = np.repeat(dofs, n_loc * m, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, n_loc * m)).reshape(-1)
    n_all = len(dofmap.points) * m
    K = sp.coo_matrix((k_loc.reshape(-1), (rows, cols)), shape=(n_all, n_all)).tocsr()
    M = sp.coo_matrix((m_full.reshape(-1), (rows, cols)), shape=(n_all, n_all)).tocsr()
    K = 0.5 * (K + K.T).tocsr()
    M = 0.5 * (M + M.T).tocsr()

    flat = dofmap.free_index.reshape(-1)
    free = np.flatnonzero(flat >= 0)
    # flat[free] is a permutation target: reorder columns so free dof f sits at f.
    perm = free[np.argsort(flat[free])]
    K = K[perm][:, perm].tocsr()
    M = M[perm][:, perm].tocsr()
    K.sum_duplicates()
    M.sum_duplicates()
    return SystemMatrices(K=K, M=M, dofmap=dofmap)


def energy_inner_product(system: SystemMatrices, u: np.ndarray, v: np.ndarray) -> float:
    """Bilinear energy form u^T K v on free dof vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (system.n_free,) or v.shape != (system.n_free,):
        raise ValueError(f"vectors must have length {system.n_free}")
    return float(u @ (system.K @ v))


@dataclass
class BoundaryQuadrature:
    """Two-point Gauss data on every boundary edge for one full field.

    energy_density is the coefficient form on the field gradient taken from
    the parent element's shape functions; mass_density is |u|^2 at the point.
    """

    points: np.ndarray
    weights: np.ndarray
    energy_density: np.ndarray
    mass_density: np.ndarray
    edge_index: np.ndarray
    edge_param: np.ndarray
    normals: np.ndarray


def boundary_quadrature_data(
    mesh: Mesh, system: SystemMatrices, tensor: CoefficientTensor, u_full: np.ndarray
) -> BoundaryQuadrature:
    """Evaluate boundary energy and mass densities of a full (expanded) field."""
    dofmap = system.dofmap
    m = dofmap.n_components
    u_full = np.asarray(u_full, dtype=float)
    if u_full.shape != (len(dofmap.points) * m,):
        raise ValueError(f"expected full field of length {len(dofmap.points) * m}")
    u_pts = u_full.reshape(-1, m)

    n_edges = len(mesh.boundary_nodes)
    parents = mesh.boundary_parents
    grad_l, _ = _barycentric_gradients(mesh.nodes, mesh.triangles)

    # Local vertex slots of the edge endpoints inside the parent triangle.
    tri_verts = mesh.triangles[parents]
    loc_a = np.argmax(tri_verts == mesh.boundary_nodes[:, :1], axis=1)
    loc_b = np.argmax(tri_verts == mesh.boundary_nodes[:, 1:2], axis=1)

    n_loc = 3 if dofmap.order == 1 else 6
    edge_idx = np.repeat(np.arange(n_edges), 2)
    s = np.tile(_GAUSS2_S, n_edges)
    bary = np.zeros((2 * n_edges, 3))
    bary[np.arange(2 * n_edges), np.repeat(loc_a, 2)] = 1.0 - s
    bary[np.arange(2 * n_edges), np.repeat(loc_b, 2)] += s

    values = _shape_values(dofmap.order, bary)
    grads_b = _shape_grads_bary(dofmap.order, bary)
    grad_n = np.einsum("xpc,xcd->xpd", grads_b, grad_l[np.repeat(parents, 2)])

    u_loc = u_pts[dofmap.tri_points[np.repeat(parents, 2)]]  # (Q, n_loc, m)
    grad_u = np.einsum("xpi,xpa->xia", u_loc, grad_n)
    u_val = np.einsum("xp,xpi->xi", values[:, :n_loc], u_loc)

    energy = np.einsum("ijab,xia,xjb->x", tensor.entries, grad_u, grad_u, optimize=True)
    mass = np.einsum("xi,xi->x", u_val, u_val)

    pa = mesh.nodes[mesh.boundary_nodes[:, 0]]
    pb = mesh.nodes[mesh.boundary_nodes[:, 1]]
    pts = (1.0 - s)[:, None] * pa[edge_idx] + s[:, None] * pb[edge_idx]
    weights = 0.5 * mesh.boundary_lengths[edge_idx]
    return BoundaryQuadrature(
        points=pts,
        weights=weights,
        energy_density=energy,
        mass_density=mass,
        edge_index=edge_idx,
        edge_param=s,
        normals=mesh.boundary_normals[edge_idx],
    )


def dump_triplets(matrix: sp.spmatrix, path) -> None:
    """Debug dump: one "row col value" line per stored entry."""
    coo = matrix.tocoo()
    with open(path, "w", encoding="utf-8") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v:.17g}\n")
