"""Config-driven command line: reproducible eigenvalue and shape experiments.

Every command reads one TOML config (shared [problem] section plus a section
named after the command), writes CSV/JSON reports under --out, and is fully
deterministic for a fixed config and seed.  Exit codes: 0 success, 1 domain
or numeric failure, 2 usage or parse failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import optimize as opt
from .assembly import EllipticityError, assemble
from .coeff import check_symmetry, legendre_hadamard_constant
from .config import (
    ConfigError,
    ProblemConfig,
    _get,
    command_section,
    load_config,
    parse_field,
)
from .geometry import InadmissibleMeshError, build_mesh, save_mesh
from .shapederiv import (
    criticality_residual,
    fd_reference,
    hadamard_dirichlet,
    hadamard_neumann,
    rotation_invariance_check,
)
from .spectrum import (
    ClusterError,
    ConvergenceError,
    detect_cluster,
    form_orthonormalize,
    solve_eigs,
)

_DOMAIN_FAILURES = (
    EllipticityError,
    InadmissibleMeshError,
    ClusterError,
    ConvergenceError,
    opt.StarShapeError,
    ValueError,
)


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else _fmt(cell) for cell in row])


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _solve_problem(problem: ProblemConfig, seed: int):
    mesh = build_mesh(problem.domain)
    system = assemble(mesh, problem.tensor, problem.bc, order=problem.order)
    spectrum = solve_eigs(system, problem.n_eigs, seed=seed)
    return mesh, system, spectrum


def _form_cluster(problem, system, spectrum, k):
    cluster = detect_cluster(spectrum, k, problem.cluster_tol)
    if cluster.lam > 1e-10:
        cluster = form_orthonormalize(system, cluster)
    return cluster


def cmd_check_tensor(problem: ProblemConfig, section, out_dir, seed) -> int:
    symmetric = check_symmetry(problem.tensor)
    theta = legendre_hadamard_constant(problem.tensor)
    print(f"symmetric: {str(symmetric).lower()}")
    print(f"theta: {_fmt(theta)}")
    return 0 if symmetric and theta > 1e-12 else 1


def cmd_solve(problem: ProblemConfig, section, out_dir, seed) -> int:
    _, system, spectrum = _solve_problem(problem, seed)
    m_norms = np.einsum(
        "ij,ij->j", spectrum.eigenvectors, system.M @ spectrum.eigenvectors
    )
    rows = [
        (str(i + 1), spectrum.eigenvalues[i], spectrum.residuals[i], m_norms[i])
        for i in range(len(spectrum))
    ]
    path = os.path.join(out_dir, "eigenvalues.csv")
    _write_csv(path, ["index", "eigenvalue", "residual", "m_norm"], rows)
    print(f"wrote {path}")
    return 0


def cmd_shape_derivative(problem: ProblemConfig, section, out_dir, seed) -> int:
    k = _get(section, "k", int, default=1)
    psi = parse_field(section)
    h = _get(section, "h", float)
    if k < 1:
        raise ConfigError("eigenvalue index k must be positive")
    if h is not None and h <= 0:
        raise ConfigError("finite-difference step h must be positive")
    mesh, system, spectrum = _solve_problem(problem, seed)
    cluster = _form_cluster(problem, system, spectrum, k)
    if problem.bc == "dirichlet":
        report = hadamard_dirichlet(mesh, problem.tensor, cluster, psi)
    else:
        report = hadamard_neumann(mesh, problem.tensor, cluster, psi)
    payload = report.to_dict()
    payload["fd"] = None
    payload["rel_err"] = None
    if h is not None:
        fd = fd_reference(
            mesh, problem.tensor, problem.bc, cluster.indices, psi,
            h=float(h), order=problem.order, seed=seed,
        )
        rel = [
            abs(d - f) / max(abs(f), abs(d), 1e-300)
            for d, f in zip(report.derivatives, fd)
        ]
        payload["fd"] = [float(v) for v in fd]
        payload["rel_err"] = [float(v) for v in rel]
    path = os.path.join(out_dir, "shape_derivative.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    return 0


def cmd_criticality(problem: ProblemConfig, section, out_dir, seed) -> int:
    k = _get(section, "k", int, default=1)
    if k < 1:
        raise ConfigError("eigenvalue index k must be positive")
    mesh, system, spectrum = _solve_problem(problem, seed)
    cluster = _form_cluster(problem, system, spectrum, k)
    report = criticality_residual(mesh, problem.tensor, cluster, problem.bc)
    payload = {
        "bc": problem.bc,
        "lambda_F": cluster.lam,
        "F": list(cluster.indices),
        "c_star": report.c_star,
        "residual": report.residual,
    }
    path = os.path.join(out_dir, "criticality.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    return 0


def cmd_optimize(problem: ProblemConfig, section, out_dir, seed) -> int:
    target = opt.Target(
        bc=problem.bc,
        tensor=problem.tensor,
        k=_get(section, "k", int, default=1),
        s=_get(section, "s", int, default=1),
        maximize=_get(section, "maximize", bool, default=False),
    )
    steps = _get(section, "steps", int, default=10)
    step0 = _get(section, "step0", float, default=0.2)
    if target.k < 1 or target.s < 1:
        raise ConfigError("k and s must be positive")
    if steps < 0 or step0 < 0:
        raise ConfigError("steps and step0 must be nonnegative")
    dump = _get(section, "dump_meshes", bool, default=False)
    state = opt.run(
        problem.domain, target, n_steps=int(steps), step0=step0,
        order=problem.order, cluster_tol=problem.cluster_tol, seed=seed,
    )
    rows = [
        (str(i + 1), rec.lam, rec.objective, rec.volume, rec.residual, rec.step_size)
        for i, rec in enumerate(state.history)
    ]
    path = os.path.join(out_dir, "history.csv")
    _write_csv(
        path, ["step", "lambda_F", "Lambda_s", "volume", "residual", "step_size"], rows
    )
    if dump:
        save_mesh(state.mesh, os.path.join(out_dir, f"mesh_step_{len(state.history):04d}.json"))
    print(f"wrote {path}")
    return 0


def cmd_rotation_check(problem: ProblemConfig, section, out_dir, seed) -> int:
    homomorphism = _get(section, "homomorphism", str, default="vector")
    n_samples = _get(section, "n_samples", int, default=100)
    if n_samples < 1:
        raise ConfigError("n_samples must be a positive integer")
    deviation = rotation_invariance_check(
        problem.tensor, homomorphism, n_samples=n_samples, seed=seed
    )
    payload = {
        "homomorphism": homomorphism,
        "n_samples": n_samples,
        "seed": seed,
        "max_deviation": deviation,
    }
    path = os.path.join(out_dir, "rotation_check.json")
    _write_json(path, payload)
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "check-tensor": ("check_tensor", cmd_check_tensor),
    "solve": ("solve", cmd_solve),
    "shape-derivative": ("shape_derivative", cmd_shape_derivative),
    "criticality": ("criticality", cmd_criticality),
    "optimize": ("optimize", cmd_optimize),
    "rotation-check": ("rotation_check", cmd_rotation_check),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenshape",
        description=(
            "Eigenvalues of elliptic systems on planar domains, boundary "
            "shape derivatives with finite-difference verification, domain "
            "criticality tests, and volume-constrained spectral descent."
        ),
        epilog=(
            "Config keys ([problem] section): tensor ('laplacian:m' or "
            "'lame:k', or tensor_m with tensor_entries records), bc "
            "(dirichlet|neumann), domain (unit_disk|ellipse|radial|file), "
            "a, b, cos, sin, path, n_rings (default 16), order (default 2), "
            "n_eigs (default 8), cluster_mode (tight|physical, default "
            "physical), cluster_tol.  Per-command sections: "
            "[shape_derivative] k, psi, dx, dy, mode, amplitude, h; "
            "[criticality] k; [optimize] k, s, steps, step0 (default 0.2), "
            "maximize, dump_meshes; [rotation_check] homomorphism, n_samples."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="TOML experiment description")
        cmd.add_argument("--out", default=".", help="output directory (default: cwd)")
        cmd.add_argument("--seed", type=int, default=0, help="solver/sampling seed")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    section_name, handler = _COMMANDS[args.command]
    try:
        raw = load_config(args.config)
        problem = ProblemConfig(raw)
        section = command_section(raw, section_name)
        os.makedirs(args.out, exist_ok=True)
        return handler(problem, section, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _DOMAIN_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
