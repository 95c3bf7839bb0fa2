"""Constant coefficient tensors a[i, j, alpha, beta] for second-order elliptic systems.

The tensor couples the alpha-derivative of unknown component i with the
beta-derivative of test component j.  Everything here is dimension-general in
the data model, but the ellipticity search is implemented for two space
dimensions only, which is what the rest of the package uses.
"""

from __future__ import annotations

import numpy as np


class CoefficientTensor:
    """Constant coefficients of a vector elliptic operator.

    entries[i, j, a, b] is the coefficient multiplying du_i/dx_a * dv_j/dx_b
    in the energy form (0-based indices; the on-disk format is 1-based).
    Immutable after construction and safe to share between threads.
    """

    def __init__(self, entries):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 4:
            raise ValueError("coefficient tensor must have 4 indices (i, j, alpha, beta)")
        m, m2, n, n2 = entries.shape
        if m != m2 or n != n2:
            raise ValueError(f"coefficient tensor shape {entries.shape} is not (m, m, n, n)")
        if m < 1 or n < 1:
            raise ValueError("component count and dimension must be positive")
        entries.setflags(write=False)
        self.entries = entries
        self.m = m
        self.n = n

    def __repr__(self):
        return f"CoefficientTensor(m={self.m}, n={self.n})"


def make_laplacian(m: int) -> CoefficientTensor:
    """Decoupled Laplacian system with m components in 2D: a = delta_ij delta_ab."""
    if m < 1:
        raise ValueError(f"component count must be >= 1, got {m}")
    n = 2
    entries = np.einsum("ij,ab->ijab", np.eye(m), np.eye(n))
    return CoefficientTensor(entries)


def make_lame(k: float) -> CoefficientTensor:
    """Elastic system -Delta u - k grad(div u): a = delta_ij delta_ab + k delta_ia delta_jb."""
    if k < 0:
        raise ValueError(f"coupling constant must be >= 0, got {k}")
    m = n = 2
    eye = np.eye(2)
    entries = np.einsum("ij,ab->ijab", eye, eye) + k * np.einsum("ia,jb->ijab", eye, eye)
    return CoefficientTensor(entries)


def check_symmetry(t: CoefficientTensor) -> bool:
    """True iff a[i,j,a,b] == a[j,i,b,a] exactly for all indices."""
    swapped = np.transpose(t.entries, (1, 0, 3, 2))
    return bool(np.max(np.abs(t.entries - swapped)) == 0.0)


def _min_over_components(t: CoefficientTensor, theta: float) -> float:
    """min over unit xi of a[i,j,a,b] xi_i xi_j eta_a eta_b at eta = (cos, sin)(theta).

    The xi-minimum of the quadratic form xi^T A(eta) xi over unit xi is the
    smallest eigenvalue of the symmetrized A(eta), computed exactly.
    """
    eta = np.array([np.cos(theta), np.sin(theta)])
    a_eta = np.einsum("ijab,a,b->ij", t.entries, eta, eta)
    a_eta = 0.5 * (a_eta + a_eta.T)
    return float(np.linalg.eigvalsh(a_eta)[0])


def legendre_hadamard_constant(t: CoefficientTensor, grid_density: int = 360) -> float:
    """Rank-one ellipticity constant: min of the form over unit xi and unit eta.

    Deterministic angular grid over eta in [0, pi) (the form is even in eta)
    with the xi-minimum resolved exactly per angle, followed by golden-section
    refinement of the best bracket until the value changes by less than 1e-12.
    A nonpositive return is a valid diagnostic, not an error.
    """
    if t.n != 2:
        raise ValueError("ellipticity search implemented for spatial dimension 2 only")
    if grid_density < 2:
        raise ValueError("grid density must be at least 2")

    thetas = np.pi * np.arange(grid_density) / grid_density
    values = np.array([_min_over_components(t, th) for th in thetas])
    best = int(np.argmin(values))
    spacing = np.pi / grid_density
    lo = thetas[best] - spacing
    hi = thetas[best] + spacing

    # Golden-section refinement on the bracket around the grid minimum.
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1 = _min_over_components(t, x1)
    f2 = _min_over_components(t, x2)
    prev = min(f1, f2)
    for _ in range(200):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = _min_over_components(t, x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = _min_over_components(t, x2)
        cur = min(f1, f2)
        if abs(prev - cur) < 1e-12:
            break
        prev = cur
    return float(min(values[best], f1, f2))


def energy_density(t: CoefficientTensor, grad: np.ndarray) -> float:
    """Pointwise energy a[i,j,a,b] G[i,a] G[j,b] of a gradient matrix G (m-by-n)."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (t.m, t.n):
        raise ValueError(f"gradient shape {grad.shape} does not match tensor ({t.m}, {t.n})")
    return float(np.einsum("ijab,ia,jb->", t.entries, grad, grad))


def apply_operator_quadratic(t: CoefficientTensor, hessians) -> np.ndarray:
    """Apply the operator to a quadratic field given by its constant Hessians.

    hessians is a sequence of m symmetric n-by-n matrices, one per component;
    component j of the result is -a[i,j,a,b] H_i[a,b].  Exact for polynomials
    of degree two, which is what the rotation-invariance check relies on.
    """
    stack = np.array([np.asarray(h, dtype=float) for h in hessians])
    if stack.shape != (t.m, t.n, t.n):
        raise ValueError(f"expected {t.m} Hessians of shape ({t.n}, {t.n}), got {stack.shape}")
    asym = np.max(np.abs(stack - np.transpose(stack, (0, 2, 1))))
    scale = max(1.0, float(np.max(np.abs(stack))))
    if asym > 1e-12 * scale:
        raise ValueError(f"Hessians must be symmetric (max asymmetry {asym:.3e})")
    stack = 0.5 * (stack + np.transpose(stack, (0, 2, 1)))
    return -np.einsum("ijab,iab->j", t.entries, stack)


def tensor_from_records(m: int, records) -> CoefficientTensor:
    """Build a tensor from sparse 1-based records (i, j, alpha, beta, value).

    Records may be 5-element sequences or mappings with keys i, j, alpha,
    beta, value; unlisted entries are zero.  This is the explicit form of the
    config-file tensor literal.
    """
    entries = np.zeros((m, m, 2, 2))
    for rec in records:
        if isinstance(rec, dict):
            i, j = int(rec["i"]), int(rec["j"])
            a, b = int(rec["alpha"]), int(rec["beta"])
            value = float(rec["value"])
        else:
            if len(rec) != 5:
                raise ValueError(f"tensor record must have 5 fields, got {rec!r}")
            i, j, a, b = (int(x) for x in rec[:4])
            value = float(rec[4])
        if not (1 <= i <= m and 1 <= j <= m and 1 <= a <= 2 and 1 <= b <= 2):
            raise ValueError(f"tensor record indices out of range: {(i, j, a, b)}")
        entries[i - 1, j - 1, a - 1, b - 1] = value
    return CoefficientTensor(entries)


def parse_tensor_literal(spec, m: int | None = None) -> CoefficientTensor:
    """Parse a preset string ("laplacian:m" / "lame:k") or a record list."""
    if isinstance(spec, str):
        name, _, arg = spec.partition(":")
        name = name.strip().lower()
        if name == "laplacian":
            return make_laplacian(int(arg) if arg else 1)
        if name == "lame":
            return make_lame(float(arg) if arg else 0.0)
        raise ValueError(f"unknown tensor preset {spec!r}")
    if m is None:
        raise ValueError("explicit tensor entries require the component count m")
    return tensor_from_records(m, spec)
