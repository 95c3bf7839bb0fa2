"""Generalized symmetric eigensolves, cluster detection, and symmetric functions.

Eigenvalue indices in the public API are 1-based, matching the reports: the
lowest eigenvalue is number 1.  Internally everything is plain 0-based numpy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .assembly import DIRICHLET, SystemMatrices

L2 = "L2"
FORM = "FORM"

TIGHT_CLUSTER_TOL = 1e-6
PHYSICAL_CLUSTER_TOL = 1e-2

_DENSE_CUTOFF = 600


class ConvergenceError(RuntimeError):
    """The eigensolver failed to converge or returned unusable pairs."""


class ClusterError(RuntimeError):
    """Cluster detection could not certify an isolated group of eigenvalues."""


@dataclass(frozen=True)
class Spectrum:
    """Sorted eigenpairs of K v = lambda M v on the free dofs.

    eigenvalues is non-decreasing; eigenvectors[:, k] matches eigenvalues[k]
    and carries the normalization tag (L2: v^T M v = 1).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    normalization: str = L2

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class Cluster:
    """Contiguous eigenvalue group F with certified spectral gap.

    indices are 1-based eigenvalue numbers; lam is the common value (the
    mean over F); basis columns span the group's eigenspace.  After
    form-orthonormalization the basis is orthonormal in the energy form and
    the originating system is recorded.
    """

    indices: tuple
    lam: float
    basis: np.ndarray
    spread: float
    gap: float
    normalization: str = L2
    system: SystemMatrices | None = None

    @property
    def size(self) -> int:
        return len(self.indices)


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    lead = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[lead, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def solve_eigs(system: SystemMatrices, k: int, seed: int = 0,
               want_vectors: bool = True) -> Spectrum:
    """Smallest k eigenpairs by shift-invert Lanczos (dense fallback when small).

    The shift is 0 for Dirichlet (K is positive definite there) and -1 for
    Neumann so the zero eigenvalue poses no factorization problem.  The
    starting vector is seeded, so results are reproducible.
    """
    n = system.n_free
    if k < 1:
        raise ValueError("need at least one eigenpair")
    if k > n:
        raise ValueError(f"requested {k} eigenpairs but only {n} free dofs")

    if n < _DENSE_CUTOFF or k > n - 2:
        w, v = scipy.linalg.eigh(
            system.K.toarray(), system.M.toarray(), subset_by_index=(0, k - 1)
        )
    else:
        sigma = 0.0 if system.dofmap.bc == DIRICHLET else -1.0
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        ncv = min(n - 1, max(2 * k + 20, k + 2))
        try:
            w, v = spla.eigsh(
                system.K.tocsc(), k=k, M=system.M.tocsc(), sigma=sigma,
                which="LM", v0=v0, ncv=ncv, tol=0,
            )
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"shift-invert Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]

    # L2 normalization, reproducible signs, residual certificates.
    mv = system.M @ v
    norms = np.sqrt(np.einsum("ij,ij->j", v, mv))
    v = _sign_fix(v / norms)
    kv = system.K @ v
    mv = system.M @ v
    res = np.linalg.norm(kv - w * mv, axis=0)
    bound = 1e-8 * np.linalg.norm(kv, axis=0) + 1e-12
    if np.any(res > bound):
        raise ConvergenceError(f"eigenpair residual {res.max():.3e} above certificate")
    if np.min(w) < -1e-10:
        raise ConvergenceError(f"negative eigenvalue {np.min(w):.3e} from a nonnegative pencil")
    if not want_vectors:
        v = v[:, :0]
    return Spectrum(eigenvalues=w, eigenvectors=v, residuals=res)


def solve_eigenvalues(system: SystemMatrices, k: int, seed: int = 0) -> np.ndarray:
    """Eigenvalues only; cheaper inner loop for finite-difference sweeps."""
    return solve_eigs(system, k, seed=seed, want_vectors=False).eigenvalues


def rayleigh(system: SystemMatrices, u: np.ndarray) -> float:
    """Energy over mass quotient u^T K u / u^T M u."""
    u = np.asarray(u, dtype=float)
    mu = float(u @ (system.M @ u))
    if mu <= 0:
        raise ValueError("vector has nonpositive mass norm")
    return float(u @ (system.K @ u)) / mu


def detect_cluster(spectrum: Spectrum, k: int, cluster_tol: float = TIGHT_CLUSTER_TOL) -> Cluster:
    """Maximal contiguous group containing eigenvalue k with a certified gap.

    Growth is greedy toward the nearer neighbor while the spread stays
    within cluster_tol * max(1, lambda_k).  Fails if the gap to the rest of
    the spectrum is less than ten times the spread, or if the group touches
    the last solved index so the gap cannot be certified.
    """
    w = spectrum.eigenvalues
    n = len(w)
    if not 1 <= k <= n:
        raise ValueError(f"eigenvalue index {k} outside solved range 1..{n}")
    window = cluster_tol * max(1.0, abs(w[k - 1]))
    lo = hi = k - 1
    while True:
        grew = False
        can_left = lo > 0 and (w[hi] - w[lo - 1]) <= window
        can_right = hi < n - 1 and (w[hi + 1] - w[lo]) <= window
        if can_left and can_right:
            if (w[lo] - w[lo - 1]) <= (w[hi + 1] - w[hi]):
                lo -= 1
            else:
                hi += 1
            grew = True
        elif can_left:
            lo -= 1
            grew = True
        elif can_right:
            hi += 1
            grew = True
        if not grew:
            break
    if hi == n - 1:
        raise ClusterError(
            f"cluster {lo + 1}..{hi + 1} touches the last solved eigenvalue; "
            "solve more pairs to certify the gap"
        )
    spread = float(w[hi] - w[lo])
    gap_above = float(w[hi + 1] - w[hi])
    gap = gap_above if lo == 0 else min(gap_above, float(w[lo] - w[lo - 1]))
    if gap < 10.0 * spread:
        raise ClusterError(
            f"ambiguous cluster {lo + 1}..{hi + 1}: gap {gap:.3e} < 10 x spread {spread:.3e}"
        )
    basis = spectrum.eigenvectors[:, lo : hi + 1].copy()
    return Cluster(
        indices=tuple(range(lo + 1, hi + 2)),
        lam=float(np.mean(w[lo : hi + 1])),
        basis=basis,
        spread=spread,
        gap=gap,
        normalization=spectrum.normalization,
    )


def form_orthonormalize(system: SystemMatrices, cluster: Cluster) -> Cluster:
    """Re-normalize the cluster basis to be orthonormal in the energy form.

    Whitening by Cholesky of the energy Gram matrix keeps the span and makes
    B^T K B the identity; each vector then has v^T M v = 1 / lambda_F up to
    the cluster tolerance.  Degenerate for lambda_F = 0, which is rejected.
    """
    if cluster.lam <= 1e-10:
        raise ValueError("energy form is degenerate for a zero eigenvalue cluster")
    basis = cluster.basis
    if basis.shape[1] != cluster.size:
        raise ValueError("cluster carries no eigenvectors to orthonormalize")
    gram = basis.T @ (system.K @ basis)
    gram = 0.5 * (gram + gram.T)
    chol = np.linalg.cholesky(gram)
    basis = scipy.linalg.solve_triangular(chol, basis.T, lower=True).T
    return replace(cluster, basis=basis, normalization=FORM, system=system)


def sym_functions(values, s: int) -> float:
    """Elementary symmetric function e_s over the values, by the stable
    single-pass recurrence e_j += value * e_{j-1}."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) == 0:
        raise ValueError("need a nonempty 1-d sequence of values")
    if not 1 <= s <= len(values):
        raise ValueError(f"order s={s} outside 1..{len(values)}")
    e = np.zeros(s + 1)
    e[0] = 1.0
    for x in values:
        for j in range(min(s, len(e) - 1), 0, -1):
            e[j] += x * e[j - 1]
    return float(e[s])


def all_sym_functions(values) -> np.ndarray:
    """All e_1 .. e_n in one pass (index 0 of the result is e_1)."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    e = np.zeros(n + 1)
    e[0] = 1.0
    for x in values:
        for j in range(n, 0, -1):
            e[j] += x * e[j - 1]
    return e[1:]
