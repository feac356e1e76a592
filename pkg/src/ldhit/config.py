"""JSON run configuration: schema, validation, and model construction."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from .asymptotics import EIntegralSettings
from .errors import ConfigError
from .jump_models import (
    Degenerate,
    Exponential,
    Gamma,
    GaussianJumpModel,
    IndependentClaims,
    JumpModel,
    ProportionalClaims,
    ScalarDistribution,
    build_sparre_andersen,
)

_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_POS_VEC = {"type": "array", "items": _POS, "minItems": 1}
_COUNT = {"type": "integer", "minimum": 1}

_SCALAR = {
    "oneOf": [
        {"type": "object", "required": ["type", "rate"], "additionalProperties": False,
         "properties": {"type": {"const": "exponential"}, "rate": _POS}},
        {"type": "object", "required": ["type", "shape", "rate"], "additionalProperties": False,
         "properties": {"type": {"const": "gamma"}, "shape": _POS, "rate": _POS}},
        {"type": "object", "required": ["type", "value"], "additionalProperties": False,
         "properties": {"type": {"const": "degenerate"}, "value": _POS}},
    ]
}

_CLAIMS = {
    "oneOf": [
        {"type": "object", "required": ["type", "split", "amount"], "additionalProperties": False,
         "properties": {"type": {"const": "proportional"}, "split": _POS_VEC, "amount": _SCALAR}},
        {"type": "object", "required": ["type", "marginals"], "additionalProperties": False,
         "properties": {"type": {"const": "independent"}, "marginals": {"type": "array", "items": _SCALAR,
                                                                        "minItems": 1}}},
    ]
}

_MODEL = {
    "oneOf": [
        {"type": "object", "required": ["type", "mu", "sigma"], "additionalProperties": False,
         "properties": {"type": {"const": "gaussian"}, "mu": _VEC,
                        "sigma": {"type": "array", "items": _VEC, "minItems": 1}}},
        {"type": "object", "required": ["type", "premium", "claims", "interarrival"], "additionalProperties": False,
         "properties": {"type": {"const": "sparre_andersen"}, "premium": _POS_VEC, "claims": _CLAIMS,
                        "interarrival": _SCALAR}},
    ]
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "target"],
    "additionalProperties": False,
    "properties": {
        "model": _MODEL,
        "target": {"type": "object", "required": ["g"], "additionalProperties": False,
                   "properties": {"g": _POS_VEC}},
        "s_grid": {
            "oneOf": [
                {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                {"type": "object", "required": ["start", "stop", "step"], "additionalProperties": False,
                 "properties": {"start": {"type": "number", "minimum": 0}, "stop": {"type": "number"},
                                "step": _POS}},
            ]
        },
        "n_traj": _COUNT,
        "max_steps": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "tilt": {
            "oneOf": [
                {"const": "dual_optimal"},
                {"type": "object", "required": ["lambda"], "additionalProperties": False,
                 "properties": {"lambda": _VEC}},
            ]
        },
        "points": {"type": "array", "items": _VEC},
        "estimation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "direct": {"type": "boolean"},
                "p_paths": _COUNT,
                "q_paths": _COUNT,
                "p_horizon": _COUNT,
                "drop_tol": _POS,
                "tail_tol": _POS,
                "order": _COUNT,
                "t_panels": _COUNT,
                "y_panels": _COUNT,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "ruin": {"type": "object", "required": ["u"], "additionalProperties": False,
                 "properties": {"u": {"type": "array", "items": {"type": "number", "minimum": 0}}, "s": _POS}},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string"}, "simulate_csv": {"type": "string"}}},
    },
}


@dataclass
class RunConfig:
    model_spec: dict
    g: np.ndarray
    s_grid: np.ndarray
    n_traj: int = 50_000
    max_steps: int = 350
    seed: int = 0
    tilt: Any = "dual_optimal"
    points: list = field(default_factory=list)
    estimation: dict = field(default_factory=dict)
    ruin: Optional[dict] = None
    out_dir: Optional[str] = None
    simulate_csv: str = "simulate.csv"

    def build_model(self) -> JumpModel:
        model = build_model(self.model_spec)
        if self.g.size != model.dim:
            raise ConfigError(f"target.g: has {self.g.size} entries, model dimension is {model.dim}")
        return model

    def e_settings(self, threads: Optional[int] = None) -> EIntegralSettings:
        knobs = {k: v for k, v in self.estimation.items() if k != "direct"}
        knobs.setdefault("seed", self.seed)
        return EIntegralSettings(threads=threads, **knobs)

    @property
    def direct_A(self) -> bool:
        return bool(self.estimation.get("direct", True))


def expand_grid(spec) -> np.ndarray:
    """``start + k * step`` for ``k = 0, 1, ...`` up to ``stop`` (inclusive up to round-off)."""
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        if stop < start:
            raise ConfigError("s_grid.stop: must not be below start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(count)
    grid = np.asarray(spec, dtype=float)
    if np.any(np.diff(grid) < 0):
        raise ConfigError("s_grid: explicit grid must be sorted ascending")
    return grid


def _scalar(spec: dict) -> ScalarDistribution:
    kind = spec["type"]
    if kind == "exponential":
        return Exponential(spec["rate"])
    if kind == "gamma":
        return Gamma(spec["shape"], spec["rate"])
    return Degenerate(spec["value"])


def build_model(spec: dict) -> JumpModel:
    if spec["type"] == "gaussian":
        return GaussianJumpModel(spec["mu"], spec["sigma"])
    claims = spec["claims"]
    if claims["type"] == "proportional":
        claim_model = ProportionalClaims(claims["split"], _scalar(claims["amount"]))
    else:
        claim_model = IndependentClaims([_scalar(m) for m in claims["marginals"]])
    return build_sparre_andersen(spec["premium"], claim_model, _scalar(spec["interarrival"]))


def validate(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        # the deepest error usually names the field that is actually wrong
        err = max(errors, key=lambda e: len(e.absolute_path))
        if err.context:
            err = max(err.context, key=lambda e: len(e.absolute_path))
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {err.message}")


def from_dict(raw: dict) -> RunConfig:
    validate(raw)
    out = raw.get("output", {})
    cfg = RunConfig(
        model_spec=raw["model"],
        g=np.asarray(raw["target"]["g"], dtype=float),
        s_grid=expand_grid(raw.get("s_grid", [1.0])),
        n_traj=raw.get("n_traj", 50_000),
        max_steps=raw.get("max_steps", 350),
        seed=raw.get("seed", 0),
        tilt=raw.get("tilt", "dual_optimal"),
        points=[np.asarray(p, dtype=float) for p in raw.get("points", [])],
        estimation=dict(raw.get("estimation", {})),
        ruin=raw.get("ruin"),
        out_dir=out.get("dir"),
        simulate_csv=out.get("simulate_csv", "simulate.csv"),
    )
    cfg.build_model()
    return cfg


def load(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return from_dict(raw)
