"""Volume-constrained descent on symmetric eigenvalue functions.

The boundary density of the tracked cluster supplies the shape gradient:
moving the boundary with normal speed proportional to the mean-removed
density decreases the objective to first order while preserving volume.
Interior nodes follow by radial blending about the centroid, which assumes
star-shaped iterates, and each accepted step is rescaled so the volume is
restored exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .assembly import assemble
from .coeff import CoefficientTensor
from .geometry import (
    DomainSpec,
    InadmissibleMeshError,
    Mesh,
    PerturbationField,
    apply_transform,
    boundary_flux,
    build_mesh,
    validate_admissible,
    volume,
)
from .shapederiv import CriticalityReport, criticality_residual
from .spectrum import (
    PHYSICAL_CLUSTER_TOL,
    ClusterError,
    detect_cluster,
    form_orthonormalize,
    solve_eigs,
    sym_functions,
)

MAX_HALVINGS = 12


class StarShapeError(RuntimeError):
    """An iterate stopped being star-shaped about its centroid."""


@dataclass(frozen=True)
class Target:
    """What is being optimized: boundary condition, tensor, eigenvalue index, order s."""

    bc: str
    tensor: CoefficientTensor
    k: int
    s: int = 1
    maximize: bool = False


@dataclass(frozen=True)
class StepRecord:
    lam: float
    objective: float
    volume: float
    residual: float
    step_size: float


@dataclass(frozen=True)
class Evaluation:
    cluster: object
    lam: float
    objective: float
    report: CriticalityReport


@dataclass(frozen=True)
class OptState:
    """Current mesh plus the step history of the flow."""

    mesh: Mesh
    target: Target
    order: int
    cluster_tol: float
    seed: int
    volume0: float
    initial: StepRecord
    history: tuple = ()
    evaluation: Evaluation | None = None

    @property
    def current(self) -> StepRecord:
        return self.history[-1] if self.history else self.initial


def evaluate_objective(mesh: Mesh, target: Target, order: int,
                       cluster_tol: float, seed: int) -> Evaluation:
    """Solve, detect the target cluster, and measure objective and residual."""
    system = assemble(mesh, target.tensor, target.bc, order=order)
    spectrum = solve_eigs(system, min(target.k + 6, system.n_free), seed=seed)
    cluster = detect_cluster(spectrum, target.k, cluster_tol)
    if cluster.lam <= 1e-10:
        raise ValueError("cannot optimize a zero-eigenvalue cluster")
    if target.s > cluster.size:
        raise ValueError(
            f"s={target.s} exceeds the detected cluster size {cluster.size}"
        )
    cluster = form_orthonormalize(system, cluster)
    group = spectrum.eigenvalues[min(cluster.indices) - 1 : max(cluster.indices)]
    objective = sym_functions(group, target.s)
    report = criticality_residual(mesh, target.tensor, cluster, target.bc)
    return Evaluation(cluster=cluster, lam=cluster.lam, objective=objective, report=report)


def _boundary_loop(mesh: Mesh) -> np.ndarray:
    """Boundary node indices ordered along the (single) closed loop."""
    nxt = {}
    for a, b in mesh.boundary_nodes:
        if a in nxt:
            raise StarShapeError("boundary is not a single simple loop")
        nxt[int(a)] = int(b)
    start = int(mesh.boundary_nodes[0, 0])
    loop = [start]
    cur = nxt[start]
    while cur != start:
        loop.append(cur)
        cur = nxt.get(cur)
        if cur is None or len(loop) > len(nxt):
            raise StarShapeError("boundary loop is broken or has several components")
    if len(loop) != len(nxt):
        raise StarShapeError("boundary has more than one loop")
    return np.array(loop, dtype=np.int64)


def _centroid(mesh: Mesh) -> np.ndarray:
    areas = mesh.signed_areas()
    centers = mesh.nodes[mesh.triangles].mean(axis=1)
    return (areas[:, None] * centers).sum(axis=0) / areas.sum()


def descent_field(mesh: Mesh, report: CriticalityReport, bc: str,
                  maximize: bool = False) -> PerturbationField:
    """Nodal field with normal speed equal to the mean-removed boundary density.

    The mean is removed against the discrete flux so the field preserves
    volume to first order exactly; interior nodes move by the boundary
    displacement at their angular projection, scaled by relative radius.
    Raises StarShapeError when the mesh is not star-shaped about its
    centroid.
    """
    loop = _boundary_loop(mesh)
    center = _centroid(mesh)

    rel = mesh.nodes[loop] - center
    angles = np.arctan2(rel[:, 1], rel[:, 0])
    turns = np.diff(np.concatenate([angles, angles[:1]]))
    turns = np.mod(turns, 2.0 * np.pi)
    if np.any(turns <= 0) or np.any(turns >= np.pi) or abs(turns.sum() - 2.0 * np.pi) > 1e-9:
        raise StarShapeError("mesh is not star-shaped about its centroid")

    # Per-node density and outward direction, length-weighted over the two
    # adjacent boundary edges.
    n_edges = len(mesh.boundary_nodes)
    edge_mean = 0.5 * (report.densities[0::2] + report.densities[1::2])
    node_w = np.zeros(mesh.n_nodes)
    node_g = np.zeros(mesh.n_nodes)
    node_nu = np.zeros((mesh.n_nodes, 2))
    for e in range(n_edges):
        for node in mesh.boundary_nodes[e]:
            node_w[node] += mesh.boundary_lengths[e]
            node_g[node] += mesh.boundary_lengths[e] * edge_mean[e]
            node_nu[node] += mesh.boundary_lengths[e] * mesh.boundary_normals[e]
    node_g[loop] /= node_w[loop]
    norms = np.hypot(node_nu[loop, 0], node_nu[loop, 1])
    node_nu[loop] /= norms[:, None]

    sign = -1.0 if maximize else 1.0

    def nodal_from_speed(speed):
        disp = np.zeros((mesh.n_nodes, 2))
        disp[loop] = sign * speed[:, None] * node_nu[loop]
        return disp

    raw = nodal_from_speed(node_g[loop])
    unit = nodal_from_speed(np.ones(len(loop)))
    flux_raw = boundary_flux(mesh, PerturbationField.nodal(raw))
    flux_unit = boundary_flux(mesh, PerturbationField.nodal(unit))
    mean = flux_raw / flux_unit
    boundary_disp = nodal_from_speed(node_g[loop] - mean)

    # Radial blend into the interior: sort the loop by angle once, then
    # interpolate displacement components and boundary radius periodically.
    order = np.argsort(angles)
    ang_s = angles[order]
    rad_s = np.hypot(rel[order, 0], rel[order, 1])
    disp_s = boundary_disp[loop[order]]
    ang_ext = np.concatenate([ang_s, ang_s[:1] + 2.0 * np.pi])
    rad_ext = np.concatenate([rad_s, rad_s[:1]])
    disp_ext = np.vstack([disp_s, disp_s[:1]])

    rel_all = mesh.nodes - center
    phi = np.arctan2(rel_all[:, 1], rel_all[:, 0])
    phi = np.where(phi < ang_ext[0], phi + 2.0 * np.pi, phi)
    r_all = np.hypot(rel_all[:, 0], rel_all[:, 1])
    r_bound = np.interp(phi, ang_ext, rad_ext)
    frac = np.clip(r_all / r_bound, 0.0, 1.0)
    disp = frac[:, None] * np.column_stack(
        [np.interp(phi, ang_ext, disp_ext[:, 0]), np.interp(phi, ang_ext, disp_ext[:, 1])]
    )
    disp[loop] = boundary_disp[loop]
    return PerturbationField.nodal(disp)


def step(state: OptState, step0: float) -> OptState:
    """One backtracking descent step with exact volume restoration.

    Tries step0 and halves up to MAX_HALVINGS times until the deformed mesh
    is admissible and the objective decreases; a failed search records a
    zero step and leaves the mesh unchanged.
    """
    ev = state.evaluation or evaluate_objective(
        state.mesh, state.target, state.order, state.cluster_tol, state.seed
    )
    if step0 < 0:
        raise ValueError("step0 must be nonnegative")
    if step0 > 0:
        field = descent_field(state.mesh, ev.report, state.target.bc, state.target.maximize)
        t = step0
        for _ in range(MAX_HALVINGS + 1):
            try:
                moved = apply_transform(state.mesh, field, t)
                scale = np.sqrt(state.volume0 / volume(moved))
                trial = Mesh(moved.nodes * scale, moved.triangles)
                if validate_admissible(trial) <= 0:
                    raise InadmissibleMeshError("trial mesh degenerate")
                ev_new = evaluate_objective(
                    trial, state.target, state.order, state.cluster_tol, state.seed
                )
            except (InadmissibleMeshError, ClusterError):
                t *= 0.5
                continue
            better = (
                ev_new.objective > ev.objective
                if state.target.maximize
                else ev_new.objective < ev.objective
            )
            if not better:
                t *= 0.5
                continue
            record = StepRecord(
                lam=ev_new.lam,
                objective=ev_new.objective,
                volume=volume(trial),
                residual=ev_new.report.residual,
                step_size=t,
            )
            return replace(
                state, mesh=trial, history=state.history + (record,), evaluation=ev_new
            )
    record = StepRecord(
        lam=ev.lam, objective=ev.objective, volume=volume(state.mesh),
        residual=ev.report.residual, step_size=0.0,
    )
    return replace(state, history=state.history + (record,), evaluation=ev)


def run(domain, target: Target, n_steps: int, step0: float, order: int = 2,
        cluster_tol: float = PHYSICAL_CLUSTER_TOL, seed: int = 0) -> OptState:
    """Initialize from a DomainSpec or Mesh and iterate the descent."""
    mesh = build_mesh(domain) if isinstance(domain, DomainSpec) else domain
    ev = evaluate_objective(mesh, target, order, cluster_tol, seed)
    initial = StepRecord(
        lam=ev.lam, objective=ev.objective, volume=volume(mesh),
        residual=ev.report.residual, step_size=0.0,
    )
    state = OptState(
        mesh=mesh, target=target, order=order, cluster_tol=cluster_tol,
        seed=seed, volume0=volume(mesh), initial=initial, evaluation=ev,
    )
    for _ in range(n_steps):
        state = step(state, step0)
    return state
