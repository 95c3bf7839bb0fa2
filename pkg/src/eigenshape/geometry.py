"""Triangular meshes of planar domains and the vector fields that deform them.

Meshes are plain node/triangle arrays with boundary edges extracted as the
edges that belong to exactly one triangle.  Domains are built by mapping a
concentric-ring triangulation of the unit disk, so refinement is controlled
by a single integer and everything is reproducible without an external
mesher.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class InadmissibleMeshError(RuntimeError):
    """A deformation produced (or a file contained) a tangled mesh."""


@dataclass(frozen=True)
class Mesh:
    """Triangulation with oriented boundary data.

    nodes: (N, 2) float array.
    triangles: (T, 3) int array, counterclockwise.
    Boundary arrays are derived on construction: edge node pairs (ordered as
    they appear in their triangle, so the loop runs counterclockwise),
    outward unit normals, lengths, and the parent triangle of each edge.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary_nodes: np.ndarray = field(init=False)
    boundary_normals: np.ndarray = field(init=False)
    boundary_lengths: np.ndarray = field(init=False)
    boundary_parents: np.ndarray = field(init=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(np.asarray(self.nodes, dtype=float))
        tris = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must be an (N, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("triangles must be a (T, 3) array")
        if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
            raise ValueError("triangle indices out of range")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "triangles", tris)
        bn, bnorm, blen, bpar = _extract_boundary(nodes, tris)
        object.__setattr__(self, "boundary_nodes", bn)
        object.__setattr__(self, "boundary_normals", bnorm)
        object.__setattr__(self, "boundary_lengths", blen)
        object.__setattr__(self, "boundary_parents", bpar)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def signed_areas(self) -> np.ndarray:
        return _signed_areas(self.nodes, self.triangles)

    def boundary_node_indices(self) -> np.ndarray:
        """Sorted unique indices of nodes lying on the boundary."""
        return np.unique(self.boundary_nodes)


def _signed_areas(nodes, triangles) -> np.ndarray:
    p = nodes[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _directed_edges(triangles):
    """All directed triangle edges (3T, 2) with their parent triangle index."""
    stacked = np.stack(
        [triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]], axis=1
    ).reshape(-1, 2)
    parents = np.repeat(np.arange(len(triangles), dtype=np.int64), 3)
    return stacked, parents


def _edge_multiplicity(directed):
    """Sorted-key view, lexicographic order, and run lengths of equal keys."""
    keys = np.sort(directed, axis=1)
    order = np.lexsort((keys[:, 1], keys[:, 0]))
    sorted_keys = keys[order]
    new_run = np.ones(len(order), dtype=bool)
    new_run[1:] = np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)
    run_ids = np.cumsum(new_run) - 1
    counts = np.bincount(run_ids)
    return order, run_ids, counts


def _extract_boundary(nodes, triangles):
    """Edges belonging to exactly one triangle, with outward unit normals."""
    if len(triangles) == 0:
        empty = np.zeros((0, 2))
        return (np.zeros((0, 2), dtype=np.int64), empty, np.zeros(0), np.zeros(0, dtype=np.int64))
    directed, all_parents = _directed_edges(triangles)
    order, run_ids, counts = _edge_multiplicity(directed)
    if np.any(counts > 2):
        raise ValueError("an edge is shared by more than two triangles")
    singles = order[counts[run_ids] == 1]
    pairs = directed[singles]
    parents = all_parents[singles]
    tangents = nodes[pairs[:, 1]] - nodes[pairs[:, 0]]
    lengths = np.hypot(tangents[:, 0], tangents[:, 1])
    if np.any(lengths == 0):
        raise ValueError("degenerate boundary edge of zero length")
    normals = np.column_stack([tangents[:, 1], -tangents[:, 0]]) / lengths[:, None]
    # Orient outward: positive dot with (edge midpoint - parent centroid).
    mids = 0.5 * (nodes[pairs[:, 0]] + nodes[pairs[:, 1]])
    centroids = nodes[triangles[parents]].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, mids - centroids) < 0
    normals[flip] *= -1.0
    return pairs, normals, lengths, parents


@dataclass(frozen=True)
class DomainSpec:
    """Recipe for a planar domain: disk, ellipse, radial profile, or mesh file."""

    variant: str
    n_rings: int = 16
    a: float = 1.0
    b: float = 1.0
    fourier: tuple = ()
    path: str | None = None

    def __post_init__(self):
        if self.variant not in ("unit_disk", "ellipse", "radial", "file"):
            raise ValueError(f"unknown domain variant {self.variant!r}")
        if self.variant != "file" and self.n_rings < 1:
            raise ValueError("n_rings must be a positive integer")
        if self.variant == "radial":
            theta = 2.0 * np.pi * np.arange(4096) / 4096
            if np.min(self.radial_profile(theta)) <= 0:
                raise ValueError("radial profile is nonpositive somewhere on the circle")

    @classmethod
    def unit_disk(cls, n_rings: int = 16) -> "DomainSpec":
        return cls("unit_disk", n_rings=n_rings)

    @classmethod
    def ellipse(cls, a: float, b: float, n_rings: int = 16) -> "DomainSpec":
        return cls("ellipse", n_rings=n_rings, a=float(a), b=float(b))

    @classmethod
    def radial(cls, coefficients, n_rings: int = 16) -> "DomainSpec":
        """Profile r(theta) = 1 + sum_k (c_k cos k theta + s_k sin k theta), k from 1."""
        four = tuple((float(c), float(s)) for c, s in coefficients)
        return cls("radial", n_rings=n_rings, fourier=four)

    @classmethod
    def from_file(cls, path: str) -> "DomainSpec":
        return cls("file", path=str(path))

    def radial_profile(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        r = np.ones_like(theta)
        for k, (c, s) in enumerate(self.fourier, start=1):
            r = r + c * np.cos(k * theta) + s * np.sin(k * theta)
        return r


def _disk_template(n_rings: int):
    """Concentric-ring triangulation of the unit disk: ring j has 6j nodes."""
    nodes = [(0.0, 0.0)]
    ring_start = [0]
    for j in range(1, n_rings + 1):
        ring_start.append(len(nodes))
        r = j / n_rings
        ang = 2.0 * np.pi * np.arange(6 * j) / (6 * j)
        nodes.extend(zip(r * np.cos(ang), r * np.sin(ang)))
    triangles = []
    # Center fan.
    first = ring_start[1]
    for i in range(6):
        triangles.append((0, first + i, first + (i + 1) % 6))
    # Annulus strips, merged by angular fraction.
    for j in range(2, n_rings + 1):
        p, q = 6 * (j - 1), 6 * j
        inner, outer = ring_start[j - 1], ring_start[j]
        i = o = 0
        while i < p or o < q:
            if o < q and (i == p or (o + 1) * p <= (i + 1) * q):
                triangles.append((outer + o % q, outer + (o + 1) % q, inner + i % p))
                o += 1
            else:
                triangles.append((outer + o % q, inner + (i + 1) % p, inner + i % p))
                i += 1
    return np.array(nodes), np.array(triangles, dtype=np.int64)


def build_mesh(spec: DomainSpec) -> Mesh:
    """Build the triangulation described by a DomainSpec.

    Disk-family variants map the ring template radially: a template node at
    polar (r, theta) goes to (r rho(theta) cos theta, r rho(theta) sin theta),
    and the ellipse uses (a r cos theta, b r sin theta).
    """
    if spec.variant == "file":
        mesh = load_mesh(spec.path)
    else:
        nodes, triangles = _disk_template(spec.n_rings)
        if spec.variant == "ellipse":
            nodes = nodes * np.array([spec.a, spec.b])
        elif spec.variant == "radial":
            theta = np.arctan2(nodes[:, 1], nodes[:, 0])
            nodes = nodes * spec.radial_profile(theta)[:, None]
        mesh = Mesh(nodes, triangles)
    if validate_admissible(mesh) <= 0:
        raise InadmissibleMeshError("built mesh contains degenerate or inverted triangles")
    return mesh


def validate_admissible(mesh: Mesh) -> float:
    """Worst triangle quality: signed area over the area of an ideal triangle.

    The reference is the equilateral triangle with the same mean-square edge
    length, so the ratio is 1 for equilateral triangles, 0 for degenerate
    ones and negative for inverted ones.  A positive return certifies the
    discrete bi-Lipschitz proxy.
    """
    p = mesh.nodes[mesh.triangles]
    e = p - np.roll(p, shift=1, axis=1)
    sq = np.einsum("tke,tke->t", e, e)
    areas = _signed_areas(mesh.nodes, mesh.triangles)
    return float(np.min(4.0 * np.sqrt(3.0) * areas / sq))


def volume(mesh: Mesh) -> float:
    """Area of the meshed domain (sum of signed triangle areas)."""
    return float(np.sum(mesh.signed_areas()))


class PerturbationField:
    """Displacement field driving mesh deformations and shape derivatives.

    Analytic variants evaluate anywhere; the nodal variant stores one
    displacement per mesh node and interpolates linearly along boundary
    edges where quadrature needs values between nodes.
    """

    def __init__(self, kind, params=None, displacements=None):
        self.kind = kind
        self.params = dict(params or {})
        if displacements is not None:
            displacements = np.asarray(displacements, dtype=float)
            if displacements.ndim != 2 or displacements.shape[1] != 2:
                raise ValueError("nodal displacements must be an (N, 2) array")
        self.displacements = displacements

    @classmethod
    def dilation(cls) -> "PerturbationField":
        return cls("dilation")

    @classmethod
    def translation(cls, dx: float, dy: float) -> "PerturbationField":
        return cls("translation", {"dx": float(dx), "dy": float(dy)})

    @classmethod
    def radial_bump(cls, mode: int, amplitude: float) -> "PerturbationField":
        """amplitude * cos(mode * theta) * (x, y): radial push modulated in angle."""
        return cls("radial_bump", {"mode": int(mode), "amplitude": float(amplitude)})

    @classmethod
    def nodal(cls, displacements) -> "PerturbationField":
        return cls("nodal", displacements=displacements)

    @property
    def is_nodal(self) -> bool:
        return self.kind == "nodal"

    def at_points(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.kind == "dilation":
            return points.copy()
        if self.kind == "translation":
            out = np.empty_like(points)
            out[:, 0] = self.params["dx"]
            out[:, 1] = self.params["dy"]
            return out
        if self.kind == "radial_bump":
            theta = np.arctan2(points[:, 1], points[:, 0])
            factor = self.params["amplitude"] * np.cos(self.params["mode"] * theta)
            return points * factor[:, None]
        raise ValueError("nodal fields are defined per node, not at arbitrary points")

    def at_nodes(self, mesh: Mesh) -> np.ndarray:
        if self.is_nodal:
            if len(self.displacements) != mesh.n_nodes:
                raise ValueError(
                    f"nodal field has {len(self.displacements)} entries "
                    f"for a mesh with {mesh.n_nodes} nodes"
                )
            return self.displacements
        return self.at_points(mesh.nodes)

    def at_edge_points(self, mesh: Mesh, edge_index, s) -> np.ndarray:
        """Field at points p = (1-s) a + s b on boundary edges (a, b)."""
        edge_index = np.asarray(edge_index, dtype=np.int64)
        s = np.asarray(s, dtype=float)[:, None]
        pairs = mesh.boundary_nodes[edge_index]
        pa, pb = mesh.nodes[pairs[:, 0]], mesh.nodes[pairs[:, 1]]
        if self.is_nodal:
            vals = self.at_nodes(mesh)
            return (1.0 - s) * vals[pairs[:, 0]] + s * vals[pairs[:, 1]]
        return self.at_points((1.0 - s) * pa + s * pb)

    def max_norm(self, mesh: Mesh) -> float:
        vals = self.at_nodes(mesh)
        return float(np.max(np.hypot(vals[:, 0], vals[:, 1]))) if len(vals) else 0.0


def apply_transform(mesh: Mesh, psi: PerturbationField, t: float) -> Mesh:
    """Move every node by t * psi(node); connectivity is kept.

    Raises InadmissibleMeshError if any triangle area becomes nonpositive,
    which signals that the deformation left the admissible class.
    """
    new_nodes = mesh.nodes + t * psi.at_nodes(mesh)
    if np.min(_signed_areas(new_nodes, mesh.triangles)) <= 0:
        raise InadmissibleMeshError(f"transform with t={t} inverts or degenerates a triangle")
    return Mesh(new_nodes, mesh.triangles)


def boundary_flux(mesh: Mesh, psi: PerturbationField) -> float:
    """Midpoint-rule boundary integral of psi . nu, the first variation of area."""
    n_edges = len(mesh.boundary_nodes)
    mids = psi.at_edge_points(mesh, np.arange(n_edges), np.full(n_edges, 0.5))
    return float(np.sum(np.einsum("ij,ij->i", mids, mesh.boundary_normals) * mesh.boundary_lengths))


def save_mesh(mesh: Mesh, path) -> None:
    """Write the JSON mesh schema: {"nodes": [[x, y], ...], "triangles": [[i, j, k], ...]}."""
    payload = {
        "nodes": [[float(x), float(y)] for x, y in mesh.nodes],
        "triangles": [[int(i), int(j), int(k)] for i, j, k in mesh.triangles],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_mesh(path) -> Mesh:
    """Read the JSON mesh schema; boundary data is rebuilt from scratch."""
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read mesh file {path}: {exc}") from exc
    if "nodes" not in payload or "triangles" not in payload:
        raise ValueError(f"mesh file {path} lacks 'nodes' or 'triangles'")
    return Mesh(np.array(payload["nodes"], dtype=float),
                np.array(payload["triangles"], dtype=np.int64))
