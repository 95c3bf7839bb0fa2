"""Spectra of constant-coefficient elliptic systems on planar domains,
boundary-integral shape derivatives, criticality tests, and
volume-constrained spectral descent."""

from .assembly import (
    DIRICHLET,
    NEUMANN,
    BoundaryQuadrature,
    DofMap,
    EllipticityError,
    SystemMatrices,
    assemble,
    boundary_quadrature_data,
    energy_inner_product,
)
from .coeff import (
    CoefficientTensor,
    apply_operator_quadratic,
    check_symmetry,
    energy_density,
    legendre_hadamard_constant,
    make_lame,
    make_laplacian,
    parse_tensor_literal,
)
from .geometry import (
    DomainSpec,
    InadmissibleMeshError,
    Mesh,
    PerturbationField,
    apply_transform,
    boundary_flux,
    build_mesh,
    load_mesh,
    save_mesh,
    validate_admissible,
    volume,
)
from .optimize import OptState, StarShapeError, Target, descent_field, run, step
from .shapederiv import (
    ClusterTrackingError,
    CriticalityReport,
    HadamardReport,
    criticality_residual,
    fd_reference,
    hadamard_dirichlet,
    hadamard_neumann,
    rotation_invariance_check,
)
from .spectrum import (
    FORM,
    L2,
    PHYSICAL_CLUSTER_TOL,
    TIGHT_CLUSTER_TOL,
    Cluster,
    ClusterError,
    ConvergenceError,
    Spectrum,
    detect_cluster,
    form_orthonormalize,
    rayleigh,
    solve_eigs,
    sym_functions,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
