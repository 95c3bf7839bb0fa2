"""Shared builders for the test suite.

Meshes, assembled systems, and spectra are cached per parameter tuple so
test modules can share the expensive solves.  Domain and tensor presets are
referenced by short tags.
"""

import numpy as np
import pytest

from eigenshape import (
    DomainSpec,
    assemble,
    build_mesh,
    detect_cluster,
    form_orthonormalize,
    make_lame,
    make_laplacian,
    solve_eigs,
)
from eigenshape.spectrum import PHYSICAL_CLUSTER_TOL, ClusterError

_CACHE = {}


def tensor_by_tag(tag):
    kind, _, arg = tag.partition(":")
    if kind == "lap":
        return make_laplacian(int(arg or 1))
    if kind == "lame":
        return make_lame(float(arg or 0))
    raise KeyError(tag)


def domain_by_tag(tag, n_rings):
    if tag == "disk":
        return DomainSpec.unit_disk(n_rings)
    if tag == "ellipse12":
        return DomainSpec.ellipse(1.2, 1 / 1.2, n_rings)
    if tag == "ellipse13":
        return DomainSpec.ellipse(1.3, 1 / 1.3, n_rings)
    if tag == "ellipse21":
        return DomainSpec.ellipse(2.0, 1.0, n_rings)
    if tag == "radial3":
        return DomainSpec.radial([(0.0, 0.0), (0.0, 0.0), (0.1, 0.0)], n_rings)
    raise KeyError(tag)


def cached_mesh(domain_tag, n_rings):
    key = ("mesh", domain_tag, n_rings)
    if key not in _CACHE:
        _CACHE[key] = build_mesh(domain_by_tag(domain_tag, n_rings))
    return _CACHE[key]


def cached_system(domain_tag, n_rings, tensor_tag, bc, order=2):
    key = ("system", domain_tag, n_rings, tensor_tag, bc, order)
    if key not in _CACHE:
        mesh = cached_mesh(domain_tag, n_rings)
        _CACHE[key] = assemble(mesh, tensor_by_tag(tensor_tag), bc, order=order)
    return _CACHE[key]


def cached_spectrum(domain_tag, n_rings, tensor_tag, bc, k, order=2, seed=0):
    key = ("spectrum", domain_tag, n_rings, tensor_tag, bc, k, order, seed)
    if key not in _CACHE:
        system = cached_system(domain_tag, n_rings, tensor_tag, bc, order)
        _CACHE[key] = solve_eigs(system, k, seed=seed)
    return _CACHE[key]


def form_cluster(domain_tag, n_rings, tensor_tag, bc, k, order=2,
                 cluster_tol=PHYSICAL_CLUSTER_TOL, n_eigs=8):
    system = cached_system(domain_tag, n_rings, tensor_tag, bc, order)
    spectrum = cached_spectrum(domain_tag, n_rings, tensor_tag, bc, n_eigs, order)
    cluster = detect_cluster(spectrum, k, cluster_tol)
    return system, spectrum, form_orthonormalize(system, cluster)


def first_simple_cluster(spectrum, lam_floor=1e-8):
    """Lowest certified singleton cluster with a positive eigenvalue."""
    for k in range(1, len(spectrum)):
        try:
            cluster = detect_cluster(spectrum, k, PHYSICAL_CLUSTER_TOL)
        except ClusterError:
            continue
        if cluster.size == 1 and cluster.lam > lam_floor:
            return cluster
    raise AssertionError("no simple positive cluster among the solved eigenvalues")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
