"""Run configuration and solver artifacts.

Both are JSON documents with an explicit schema version.  Every float that
matters is stored as a hexfloat string, so configs and artifacts round-trip
bit-exactly across platforms; single-worker reruns of the same config write
byte-identical artifacts (no timestamps live in the artifact body; wall
clock goes to the run log).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .errors import ConfigError
from .loops import LaurentLoop
from .solver import SolutionStep
from .weierstrass import NoidParams

__all__ = [
    "RunConfig",
    "RunArtifact",
    "loop_to_json",
    "loop_from_json",
    "params_to_json",
    "params_from_json",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(s) -> float:
    if isinstance(s, (int, float)):
        return float(s)
    return float.fromhex(s)


def loop_to_json(loop: LaurentLoop) -> dict:
    entries = []
    n = loop.degree
    for k, c in enumerate(loop.coeffs):
        if c != 0:
            entries.append([k - n, _hex(c.real), _hex(c.imag)])
    return {"degree": n, "rho": _hex(loop.rho), "coeffs": entries}


def loop_from_json(doc: dict) -> LaurentLoop:
    n = int(doc["degree"])
    c = np.zeros(2 * n + 1, dtype=complex)
    for i, re_s, im_s in doc["coeffs"]:
        c[int(i) + n] = _unhex(re_s) + 1j * _unhex(im_s)
    return LaurentLoop(_unhex(doc["rho"]), c)


def params_to_json(x: NoidParams) -> dict:
    return {
        "n": x.n,
        "frozen": list(x.frozen),
        "a": [loop_to_json(l) for l in x.a],
        "b": [loop_to_json(l) for l in x.b],
        "p": [loop_to_json(l) for l in x.p],
    }


def params_from_json(doc: dict) -> NoidParams:
    return NoidParams(
        int(doc["n"]),
        tuple(loop_from_json(d) for d in doc["a"]),
        tuple(loop_from_json(d) for d in doc["b"]),
        tuple(loop_from_json(d) for d in doc["p"]),
        tuple(int(i) for i in doc["frozen"]),
    )


_TOL_KEYS = ("ode_tol", "solver_tol", "quad_tol", "iwasawa_tol")


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs; serializes losslessly."""

    family: dict                       # {"builtin": "jorge_meeks", "n": 3, "scale": 1.0}
    t_values: tuple = ()               # continuation targets (may mix signs)
    truncation: int = defaults.TRUNCATION
    rho: float = defaults.RHO
    ode_tol: float = defaults.ODE_TOL
    solver_tol: float = defaults.SOLVER_TOL
    quad_tol: float = defaults.QUAD_TOL
    iwasawa_tol: float = defaults.IWASAWA_TOL
    grid: dict = field(default_factory=lambda: {
        "core_rings": 10, "core_sectors": 32,
        "end_rings": 12, "end_sectors": 24, "end_inner": 1e-4})
    workers: int = 1

    def __post_init__(self):
        for key in _TOL_KEYS:
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key} must be positive")
        if self.truncation < 1:
            raise ConfigError("truncation must be at least 1")
        if self.rho <= 1.0:
            raise ConfigError("rho must exceed 1")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        kind = self.family.get("builtin") if isinstance(self.family, dict) else None
        if kind not in ("jorge_meeks", "delaunay") and "params" not in self.family:
            raise ConfigError("family needs a builtin name or explicit parameters")
        object.__setattr__(self, "t_values", tuple(float(t) for t in self.t_values))
        if kind != "delaunay" and any(t == 0.0 for t in self.t_values) \
                and len(self.t_values) > 1:
            raise ConfigError("t = 0 is only legal as an explicit lone baseline")

    def build_params(self) -> NoidParams:
        from .weierstrass import jorge_meeks

        if "params" in self.family:
            return params_from_json(self.family["params"])
        if self.family["builtin"] == "jorge_meeks":
            return jorge_meeks(int(self.family.get("n", 3)),
                               float(self.family.get("scale", 1.0)),
                               rho=self.rho, degree=self.truncation)
        raise ConfigError("the delaunay family has no free parameters to build")

    @property
    def is_delaunay(self) -> bool:
        return self.family.get("builtin") == "delaunay"

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "t_values": [_hex(t) for t in self.t_values],
            "truncation": self.truncation,
            "rho": _hex(self.rho),
            "tolerances": {k: _hex(getattr(self, k)) for k in _TOL_KEYS},
            "grid": self.grid,
            "workers": self.workers,
        }

    @staticmethod
    def from_json(doc: dict) -> "RunConfig":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {doc.get('schema_version')}")
        tol = {k: _unhex(v) for k, v in doc.get("tolerances", {}).items()
               if k in _TOL_KEYS}
        return RunConfig(
            family=doc["family"],
            t_values=tuple(_unhex(t) for t in doc.get("t_values", [])),
            truncation=int(doc.get("truncation", defaults.TRUNCATION)),
            rho=_unhex(doc.get("rho", defaults.RHO)),
            grid=doc.get("grid", RunConfig.__dataclass_fields__["grid"].default_factory()),
            workers=int(doc.get("workers", 1)),
            **tol,
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        return RunConfig.from_json(doc)


def _step_to_json(step: SolutionStep) -> dict:
    return {
        "t": _hex(step.t),
        "x": params_to_json(step.x),
        "residual_norm": _hex(step.residual_norm),
        "iterations": step.iterations,
        "is_target": bool(step.is_target),
        "dt_after": _hex(step.dt_after),
    }


def _step_from_json(doc: dict) -> SolutionStep:
    return SolutionStep(
        t=_unhex(doc["t"]),
        x=params_from_json(doc["x"]),
        residual_norm=_unhex(doc["residual_norm"]),
        iterations=int(doc["iterations"]),
        is_target=bool(doc["is_target"]),
        dt_after=_unhex(doc.get("dt_after", "0x0.0p+0")),
    )


@dataclass(frozen=True)
class RunArtifact:
    """Config snapshot plus the full solution path with loop coefficients."""

    config: RunConfig
    steps: tuple                      # SolutionStep, all accepted continuation points
    provenance: dict = field(default_factory=dict)

    def targets(self) -> list[SolutionStep]:
        return [s for s in self.steps if s.is_target]

    def step_at(self, t: float) -> SolutionStep:
        for s in self.steps:
            if s.t == t:
                return s
        raise ConfigError(f"artifact has no step at t = {t}")

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_json(),
            "steps": [_step_to_json(s) for s in self.steps],
            "provenance": self.provenance,
        }

    @staticmethod
    def from_json(doc: dict) -> "RunArtifact":
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema version {doc.get('schema_version')}")
        return RunArtifact(
            config=RunConfig.from_json(doc["config"]),
            steps=tuple(_step_from_json(d) for d in doc["steps"]),
            provenance=doc.get("provenance", {}),
        )

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @staticmethod
    def load(path) -> "RunArtifact":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read artifact {path}: {err}") from err
        return RunArtifact.from_json(doc)
