"""Boundary-integral derivatives of symmetric eigenvalue functions.

The derivative of the s-th elementary symmetric function of a coincident
eigenvalue group F under a domain perturbation psi is a boundary integral of
an eigenfunction density against the normal speed, with the prefactor
-lambda_F^s * C(|F|-1, s-1).  The density is the energy density of the
form-orthonormal basis for Dirichlet conditions and (lambda_F |v|^2 - energy)
for Neumann.  A finite-difference path on the discrete functional provides an
independent check, and a constant boundary density characterizes critical
domains under the volume constraint.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import DIRICHLET, NEUMANN, assemble, boundary_quadrature_data
from .coeff import CoefficientTensor, apply_operator_quadratic
from .geometry import DomainSpec, Mesh, PerturbationField, apply_transform, build_mesh
from .spectrum import FORM, Cluster, ClusterError, all_sym_functions, solve_eigenvalues


class ClusterTrackingError(ClusterError):
    """A finite-difference perturbation destroyed the tracked group's isolation."""


@dataclass(frozen=True)
class HadamardReport:
    """Boundary-formula derivatives of Lambda_{F,s} for one perturbation.

    per_l_integrals[l] is the boundary integral of basis member l's density
    times the normal speed; derivatives[s-1] is the derivative of the s-th
    symmetric function.  The stored fields always satisfy
    derivatives[s-1] = -lam^s * C(|F|-1, s-1) * sum(per_l_integrals).
    """

    bc: str
    lam: float
    indices: tuple
    per_l_integrals: np.ndarray
    derivatives: np.ndarray

    def to_dict(self) -> dict:
        return {
            "bc": self.bc,
            "lambda_F": self.lam,
            "F": list(self.indices),
            "s": list(range(1, len(self.derivatives) + 1)),
            "dLambda": [float(d) for d in self.derivatives],
            "per_l_integrals": [float(v) for v in self.per_l_integrals],
        }


@dataclass(frozen=True)
class CriticalityReport:
    """Deviation of the summed boundary density from a constant.

    c_star is the weighted boundary average (the multiplier a critical
    domain would exhibit); residual is the weighted RMS deviation relative
    to max(|c_star|, floor).
    """

    c_star: float
    residual: float
    densities: np.ndarray
    weights: np.ndarray
    edge_index: np.ndarray

    def to_dict(self) -> dict:
        return {"c_star": self.c_star, "residual": self.residual}


def _cluster_system(cluster: Cluster):
    if cluster.normalization != FORM or cluster.system is None:
        raise ValueError("cluster basis must be form-orthonormalized first")
    return cluster.system


def _boundary_integrals(mesh, tensor, cluster, psi, neumann: bool):
    """Per-member boundary integrals of the bc density against psi . nu."""
    system = _cluster_system(cluster)
    integrals = np.empty(cluster.size)
    densities = None
    for l in range(cluster.size):
        full = system.dofmap.expand(cluster.basis[:, l])
        bq = boundary_quadrature_data(mesh, system, tensor, full)
        dens = (cluster.lam * bq.mass_density - bq.energy_density) if neumann else bq.energy_density
        if densities is None:
            densities = np.zeros_like(dens)
            zeta = psi.at_edge_points(mesh, bq.edge_index, bq.edge_param)
            zeta_nu = np.einsum("ij,ij->i", zeta, bq.normals)
            weights, edge_index = bq.weights, bq.edge_index
        densities += dens
        integrals[l] = float(np.sum(bq.weights * dens * zeta_nu))
    return integrals, densities, weights, edge_index


def _derivatives_from_integrals(lam: float, size: int, integrals: np.ndarray) -> np.ndarray:
    total = float(np.sum(integrals))
    return np.array([-(lam**s) * comb(size - 1, s - 1) * total for s in range(1, size + 1)])


def hadamard_dirichlet(
    mesh: Mesh, tensor: CoefficientTensor, cluster: Cluster, psi: PerturbationField
) -> HadamardReport:
    """Derivative of each Lambda_{F,s} for the Dirichlet problem."""
    system = _cluster_system(cluster)
    if system.dofmap.bc != DIRICHLET:
        raise ValueError("cluster was solved with Neumann conditions; use hadamard_neumann")
    if cluster.lam <= 0:
        raise ValueError("Dirichlet derivative needs a positive eigenvalue")
    integrals, _, _, _ = _boundary_integrals(mesh, tensor, cluster, psi, neumann=False)
    return HadamardReport(
        bc=DIRICHLET,
        lam=cluster.lam,
        indices=cluster.indices,
        per_l_integrals=integrals,
        derivatives=_derivatives_from_integrals(cluster.lam, cluster.size, integrals),
    )


def hadamard_neumann(
    mesh: Mesh, tensor: CoefficientTensor, cluster: Cluster, psi: PerturbationField
) -> HadamardReport:
    """Derivative of each Lambda_{F,s} for the Neumann problem.

    A zero-eigenvalue cluster (constant eigenfunctions) has identically zero
    density, so its report is exactly zero for every perturbation.
    """
    if cluster.lam <= 1e-10:
        zeros = np.zeros(cluster.size)
        return HadamardReport(
            bc=NEUMANN, lam=cluster.lam, indices=cluster.indices,
            per_l_integrals=zeros, derivatives=zeros.copy(),
        )
    system = _cluster_system(cluster)
    if system.dofmap.bc != NEUMANN:
        raise ValueError("cluster was solved with Dirichlet conditions; use hadamard_dirichlet")
    integrals, _, _, _ = _boundary_integrals(mesh, tensor, cluster, psi, neumann=True)
    return HadamardReport(
        bc=NEUMANN,
        lam=cluster.lam,
        indices=cluster.indices,
        per_l_integrals=integrals,
        derivatives=_derivatives_from_integrals(cluster.lam, cluster.size, integrals),
    )


class _PerturbedSolver:
    """Eigenvalues of node-displaced copies of one base problem.

    Factors the base shifted matrix once and reuses it as a preconditioner
    for warm-started block iterations on each perturbed mesh, which makes a
    finite-difference sweep cost little more than its assemblies.  Every
    solve is verified against the same residual certificate as the main
    solver; anything suspicious falls back to a fresh shift-invert solve.
    """

    def __init__(self, mesh, tensor, bc, k_solve, order, seed):
        self.tensor = tensor
        self.bc = bc
        self.k_solve = k_solve
        self.order = order
        self.seed = seed
        base = assemble(mesh, tensor, bc, order=order)
        self.n = base.n_free
        self.dense = self.n < 600 or k_solve + 2 > self.n - 2
        if self.dense:
            self.opinv = None
            self.basis = None
            return
        sigma = 0.0 if bc == DIRICHLET else -1.0
        lu = spla.splu((base.K - sigma * base.M).tocsc())
        self.opinv = spla.LinearOperator(
            (self.n, self.n), matvec=lu.solve, matmat=lu.solve
        )
        rng = np.random.default_rng(seed)
        block = min(k_solve + 1, self.n - 2)
        w, v = spla.eigsh(
            base.K.tocsc(), k=block, M=base.M.tocsc(), sigma=sigma, which="LM",
            v0=rng.standard_normal(self.n), ncv=min(self.n - 1, 2 * block + 20),
            tol=0, OPinv=self.opinv,
        )
        order_ix = np.argsort(w)
        self.base_values = w[order_ix]
        self.basis = v[:, order_ix]

    def eigenvalues(self, mesh_t) -> np.ndarray:
        system = assemble(mesh_t, self.tensor, self.bc, order=self.order)
        if not self.dense:
            w = self._warm_solve(system)
            if w is not None:
                return w
        return solve_eigenvalues(system, self.k_solve, seed=self.seed)

    def _warm_solve(self, system):
        tol = 1e-9 * (1.0 + float(self.base_values[-1]))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                w, v = spla.lobpcg(
                    system.K, self.basis, B=system.M, M=self.opinv,
                    largest=False, tol=tol, maxiter=80,
                )
            except Exception:
                return None
        order_ix = np.argsort(w)
        w, v = w[order_ix][: self.k_solve], v[:, order_ix][:, : self.k_solve]
        kv = system.K @ v
        res = np.linalg.norm(kv - (system.M @ v) * w, axis=0)
        # Residuals at the block tolerance pin the Ritz values far beyond
        # finite-difference needs (the eigenvalue error is quadratic in the
        # residual); reject anything the iteration left unconverged.
        if np.any(res > np.maximum(1e-8 * np.linalg.norm(kv, axis=0) + 1e-12, 2.0 * tol)):
            return None
        if np.min(w) < -1e-10:
            return None
        # A tiny node displacement cannot move eigenvalues by an O(1) factor;
        # a large jump means the block lost track of the smallest group.
        drift = np.abs(w - self.base_values[: self.k_solve])
        if np.any(drift > 0.2 * np.maximum(1.0, np.abs(self.base_values[: self.k_solve]))):
            return None
        return w


def _group_values(w, indices):
    """Symmetric functions of the tracked group, with the isolation guard."""
    lo, hi = min(indices) - 1, max(indices) - 1
    group = w[lo : hi + 1]
    spread = float(group[-1] - group[0])
    gap = float(w[hi + 1] - group[-1])
    if lo > 0:
        gap = min(gap, float(group[0] - w[lo - 1]))
    if gap <= 0 or gap < 5.0 * spread:
        raise ClusterTrackingError(
            f"perturbed gap {gap:.3e} below 5 x spread {spread:.3e}: group identity lost"
        )
    return all_sym_functions(group)


def fd_reference(
    domain,
    tensor: CoefficientTensor,
    bc: str,
    indices,
    psi: PerturbationField,
    h: float,
    order: int = 2,
    seed: int = 0,
) -> np.ndarray:
    """Central-difference derivatives of Lambda_{F,s} on the discrete functional.

    domain may be a Mesh or a DomainSpec.  Nodes move by +-h and +-h/2 along
    psi on fixed connectivity; one Richardson step removes the O(h^2) error.
    The group F is tracked by its index set, guarded against crossings.
    Returns one value per s = 1..|F|.
    """
    return fd_reference_many(domain, tensor, bc, indices, [psi], h, order=order, seed=seed)[0]


def fd_reference_many(
    domain,
    tensor: CoefficientTensor,
    bc: str,
    indices,
    psis,
    h: float,
    order: int = 2,
    seed: int = 0,
) -> list:
    """fd_reference for several perturbation fields sharing one base problem."""
    mesh = build_mesh(domain) if isinstance(domain, DomainSpec) else domain
    indices = tuple(int(i) for i in indices)
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    solver = _PerturbedSolver(mesh, tensor, bc, max(indices) + 2, order, seed)

    results = []
    for psi in psis:
        def lam_at(t):
            w = solver.eigenvalues(apply_transform(mesh, psi, t))
            return _group_values(w, indices)

        def diff(step):
            return (lam_at(step) - lam_at(-step)) / (2.0 * step)

        d_h = diff(h)
        d_half = diff(0.5 * h)
        results.append((4.0 * d_half - d_h) / 3.0)
    return results


def criticality_residual(
    mesh: Mesh, tensor: CoefficientTensor, cluster: Cluster, bc: str
) -> CriticalityReport:
    """How far the summed boundary density is from the constant of a critical domain."""
    if cluster.size == 0:
        raise ValueError("empty cluster")
    if bc == NEUMANN and cluster.lam <= 1e-10:
        # Constant eigenfunctions: both density terms vanish identically.
        n_q = 2 * len(mesh.boundary_nodes)
        weights = np.repeat(0.5 * mesh.boundary_lengths, 2)
        return CriticalityReport(
            c_star=0.0, residual=0.0, densities=np.zeros(n_q),
            weights=weights, edge_index=np.repeat(np.arange(len(mesh.boundary_nodes)), 2),
        )
    identity = PerturbationField.translation(0.0, 0.0)
    _, densities, weights, edge_index = _boundary_integrals(
        mesh, tensor, cluster, identity, neumann=(bc == NEUMANN)
    )
    total_w = float(np.sum(weights))
    c_star = float(np.sum(weights * densities)) / total_w
    rms = np.sqrt(float(np.sum(weights * (densities - c_star) ** 2)) / total_w)
    floor = 1e-12 * max(1.0, abs(cluster.lam))
    residual = rms / max(abs(c_star), floor)
    return CriticalityReport(
        c_star=c_star, residual=residual, densities=densities,
        weights=weights, edge_index=edge_index,
    )


def _random_rotation(rng) -> np.ndarray:
    angle = rng.uniform(0.0, 2.0 * np.pi)
    c, s = np.cos(angle), np.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    if rng.integers(2):
        rot = rot @ np.diag([1.0, -1.0])
    return rot


def rotation_invariance_check(
    tensor: CoefficientTensor,
    homomorphism: str,
    n_samples: int = 100,
    seed: int = 0,
) -> float:
    """Max deviation of L(S(R)^T u o R) from S(R)^T (L u) o R over random samples.

    homomorphism is "identity_block" (S(R) = I) or "vector" (S(R) = R, which
    requires m = n).  Random orthogonal maps include reflections.  Fields u
    are random quadratics, on which the operator acts exactly through the
    Hessians, so the reported deviation carries no discretization error.
    """
    if homomorphism == "vector":
        if tensor.m != tensor.n:
            raise ValueError("vector homomorphism requires m == n")
    elif homomorphism != "identity_block":
        raise ValueError(f"unknown homomorphism {homomorphism!r}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        rot = _random_rotation(rng)
        smat = rot if homomorphism == "vector" else np.eye(tensor.m)
        hess = rng.standard_normal((tensor.m, tensor.n, tensor.n))
        hess = 0.5 * (hess + np.transpose(hess, (0, 2, 1)))
        rotated = np.einsum("qp,ab,qbc,cd->pad", smat, rot.T, hess, rot)
        rotated = 0.5 * (rotated + np.transpose(rotated, (0, 2, 1)))
        lhs = apply_operator_quadratic(tensor, rotated)
        rhs = smat.T @ apply_operator_quadratic(tensor, hess)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst
