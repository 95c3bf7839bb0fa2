"""Config-file parsing and validation for the command-line front end.

One TOML file describes an experiment: a [problem] section shared by every
command plus one section per command.  All validation happens here, before
any computation, so parse problems surface with exit code 2.
"""

from __future__ import annotations

import os

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .assembly import DIRICHLET, NEUMANN
from .coeff import CoefficientTensor, parse_tensor_literal
from .geometry import DomainSpec, PerturbationField
from .spectrum import PHYSICAL_CLUSTER_TOL, TIGHT_CLUSTER_TOL


class ConfigError(ValueError):
    """Unusable configuration: missing keys, bad types, bad references."""


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc


def _get(section: dict, key: str, kind, default=None, required=False):
    if key not in section:
        if required:
            raise ConfigError(f"missing required key {key!r}")
        return default
    value = section[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None:
        if (isinstance(value, bool) and kind is not bool) or not isinstance(value, kind):
            raise ConfigError(
                f"key {key!r} must be {getattr(kind, '__name__', kind)}, got {value!r}"
            )
    return value


class ProblemConfig:
    """Validated shared problem description."""

    def __init__(self, raw: dict):
        section = raw.get("problem")
        if not isinstance(section, dict):
            raise ConfigError("config needs a [problem] section")
        self.bc = _get(section, "bc", str, required=True).lower()
        if self.bc not in (DIRICHLET, NEUMANN):
            raise ConfigError(f"bc must be 'dirichlet' or 'neumann', got {self.bc!r}")
        self.tensor = self._parse_tensor(section)
        self.domain = self._parse_domain(section)
        self.order = _get(section, "order", int, default=2)
        if self.order not in (1, 2):
            raise ConfigError("order must be 1 or 2")
        self.n_eigs = _get(section, "n_eigs", int, default=8)
        if self.n_eigs < 1:
            raise ConfigError("n_eigs must be positive")
        mode = _get(section, "cluster_mode", str, default="physical").lower()
        if mode not in ("tight", "physical"):
            raise ConfigError("cluster_mode must be 'tight' or 'physical'")
        default_tol = TIGHT_CLUSTER_TOL if mode == "tight" else PHYSICAL_CLUSTER_TOL
        self.cluster_tol = _get(section, "cluster_tol", float, default=default_tol)
        if self.cluster_tol <= 0:
            raise ConfigError("cluster_tol must be positive")

    @staticmethod
    def _parse_tensor(section: dict) -> CoefficientTensor:
        literal = section.get("tensor")
        entries = section.get("tensor_entries")
        try:
            if literal is not None:
                return parse_tensor_literal(literal)
            if entries is not None:
                m = _get(section, "tensor_m", int, required=True)
                if m < 1:
                    raise ConfigError("tensor_m must be positive")
                return parse_tensor_literal(entries, m=m)
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError(f"bad tensor specification: {exc}") from exc
        raise ConfigError("problem section needs 'tensor' or 'tensor_entries'")

    @staticmethod
    def _parse_domain(section: dict) -> DomainSpec:
        name = _get(section, "domain", str, required=True).lower()
        n_rings = _get(section, "n_rings", int, default=16)
        try:
            if name == "unit_disk":
                return DomainSpec.unit_disk(n_rings)
            if name == "ellipse":
                a = _get(section, "a", float, required=True)
                b = _get(section, "b", float, required=True)
                if a <= 0 or b <= 0:
                    raise ConfigError("ellipse half-axes must be positive")
                return DomainSpec.ellipse(a, b, n_rings)
            if name == "radial":
                cos = section.get("cos", [])
                sin = section.get("sin", [])
                if not isinstance(cos, list) or not isinstance(sin, list):
                    raise ConfigError("radial 'cos'/'sin' must be coefficient lists")
                n = max(len(cos), len(sin))
                coeffs = [
                    (cos[i] if i < len(cos) else 0.0, sin[i] if i < len(sin) else 0.0)
                    for i in range(n)
                ]
                return DomainSpec.radial(coeffs, n_rings)
            if name == "file":
                path = _get(section, "path", str, required=True)
                if not os.path.exists(path):
                    raise ConfigError(f"mesh file does not exist: {path}")
                return DomainSpec.from_file(path)
        except ValueError as exc:
            raise ConfigError(f"bad domain: {exc}") from exc
        raise ConfigError(f"unknown domain {name!r}")


def parse_field(section: dict) -> PerturbationField:
    name = _get(section, "psi", str, required=True).lower()
    if name == "dilation":
        return PerturbationField.dilation()
    if name == "translation":
        return PerturbationField.translation(
            _get(section, "dx", float, default=1.0),
            _get(section, "dy", float, default=0.0),
        )
    if name == "radial_bump":
        return PerturbationField.radial_bump(
            _get(section, "mode", int, required=True),
            _get(section, "amplitude", float, required=True),
        )
    raise ConfigError(f"unknown perturbation field {name!r}")


def command_section(raw: dict, name: str) -> dict:
    section = raw.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{name}] must be a section")
    return section
