"""Run configuration loaded from JSON or TOML.

Every component is built (and so validated) up front by
:meth:`RunConfig.components`, before any solve starts. Errors carry the
config path of the offending entry.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import AtlasError, ConfigError
from .mesh import build_mesh, principal_eigenpair, solve_poisson
from .model import make_coefficient, make_functional, make_nonlinearity

__all__ = ["RunConfig", "Components", "load_config", "POWERLIKE_PRESETS"]

SECTIONS = {"mesh", "nonlinearity", "coefficient", "functional", "analysis", "powerlike", "tolerances", "output"}
TOLERANCE_KEYS = {"tol_fp", "tol_pde", "tol_g", "tol_eig", "tol_lin"}
POWERLIKE_PRESETS = ("abs-sin", "abs-sin-power-weight")


@dataclass
class Components:
    mesh: object
    nl: object = None
    coef: object = None
    g: object = None


@dataclass
class RunConfig:
    mesh: dict
    nonlinearity: Optional[dict] = None
    coefficient: Optional[dict] = None
    functional: Optional[dict] = None
    analysis: dict = field(default_factory=dict)
    powerlike: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    output: Optional[str] = None
    source: Optional[str] = None

    @classmethod
    def from_dict(cls, data, source=None):
        if not isinstance(data, dict):
            raise ConfigError("config root must be a table/object")
        unknown = set(data) - SECTIONS
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        if "mesh" not in data:
            raise ConfigError("mesh: section is required")
        tol = dict(data.get("tolerances", {}))
        bad = set(tol) - TOLERANCE_KEYS
        if bad:
            raise ConfigError(f"tolerances: unknown keys {sorted(bad)}")
        return cls(
            mesh=dict(data["mesh"]),
            nonlinearity=data.get("nonlinearity"),
            coefficient=data.get("coefficient"),
            functional=data.get("functional"),
            analysis=dict(data.get("analysis", {})),
            powerlike=dict(data.get("powerlike", {})),
            tolerances=tol,
            output=data.get("output"),
            source=source,
        )

    @property
    def solver_options(self):
        return {k: float(self.tolerances[k]) for k in ("tol_fp", "tol_pde") if k in self.tolerances}

    def components(self, need=("nl", "coef", "g")):
        """Build the mesh and the requested model objects."""
        mesh = _guard("mesh", lambda: build_mesh(
            int(self.mesh.get("dim", 1)), self.mesh.get("extents", 1.0), self.mesh.get("n", 1024)
        ))
        if "tol_eig" in self.tolerances:
            mesh.__dict__["eigenpair"] = _guard(
                "tolerances.tol_eig", lambda: principal_eigenpair(mesh, tol_eig=float(self.tolerances["tol_eig"]))
            )
        if "tol_lin" in self.tolerances:
            mesh.__dict__["torsion"] = _guard(
                "tolerances.tol_lin", lambda: solve_poisson(mesh, [1.0] * mesh.size, tol=float(self.tolerances["tol_lin"]))
            )
        out = Components(mesh=mesh)
        if "nl" in need:
            entry = _require(self.nonlinearity, "nonlinearity")
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                out.nl = _guard("nonlinearity", lambda: make_nonlinearity(entry["kind"], entry.get("params", {})))
            for w in caught:
                warnings.warn(str(w.message), stacklevel=2)
        if "coef" in need:
            entry = _require(self.coefficient, "coefficient")
            out.coef = _guard("coefficient", lambda: make_coefficient(
                entry["kind"],
                entry.get("params", {}),
                k_max=entry.get("k_max"),
                declared_zeros=entry.get("declared_zeros", ()),
            ))
        if "g" in need:
            entry = dict(_require(self.functional, "functional"))
            kind = entry.pop("kind", None)
            out.g = _guard("functional", lambda: make_functional(kind, entry))
        return out


def _require(section, name):
    if not section:
        raise ConfigError(f"{name}: section is required for this command")
    if not isinstance(section, dict) or "kind" not in section:
        raise ConfigError(f"{name}.kind: missing")
    return section


def _guard(path, build):
    try:
        return build()
    except ConfigError:
        raise
    except AtlasError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid entry ({exc})") from exc


def load_config(path):
    """Read a ``.json`` or ``.toml`` run configuration."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return RunConfig.from_dict(data, source=str(path))
