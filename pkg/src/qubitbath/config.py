"""Run configuration: JSON schema, defaults and construction of model objects."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .errors import InvalidInputError
from .register import DEFAULT_MAX_N, RegisterParams, str_to_spins
from .reservoir import FormFactor

_NUMBER = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_SEED = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

_FORM = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "p": _NUMBER,
        "prefactor": _NONNEG,
        "cutoff_scale": _POSITIVE,
        "phase": _NUMBER,
    },
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["register"],
    "properties": {
        "seed": _SEED,
        "register": {
            "type": "object",
            "additionalProperties": False,
            "required": ["n"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "max_n": {"type": "integer", "minimum": 1},
                "j": {
                    "oneOf": [
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["pattern"],
                            "properties": {"pattern": {"const": "zero"}},
                        },
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["pattern", "value"],
                            "properties": {
                                "pattern": {"const": "nearest_neighbour"},
                                "value": _NUMBER,
                            },
                        },
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["pattern", "matrix"],
                            "properties": {
                                "pattern": {"const": "explicit"},
                                "matrix": {
                                    "type": "array",
                                    "items": {"type": "array", "items": _NUMBER},
                                },
                            },
                        },
                    ]
                },
                "b": {
                    "oneOf": [
                        {"type": "array", "items": _NONNEG, "minItems": 1},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["sampler"],
                            "properties": {
                                "sampler": {"const": "uniform"},
                                "min": _NONNEG,
                                "max": _NONNEG,
                                "seed": _SEED,
                            },
                        },
                    ]
                },
            },
        },
        "env": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"beta": _POSITIVE},
        },
        "couplings": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"lambda1": _NUMBER, "lambda2": _NUMBER},
        },
        "form1": _FORM,
        "form2": _FORM,
        "dynamics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "times": {
                    "oneOf": [
                        {"type": "null"},
                        {"type": "array", "items": _NONNEG, "minItems": 1},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["start", "stop", "num"],
                            "properties": {
                                "start": _NONNEG,
                                "stop": _NONNEG,
                                "num": {"type": "integer", "minimum": 1},
                                "spacing": {"enum": ["linear", "log"]},
                            },
                        },
                    ]
                },
                "num_times": {"type": "integer", "minimum": 2},
                "elements": {
                    "oneOf": [{"type": "null"}, {"type": "array", "items": {"type": "string"}}]
                },
                "initial_state": {"enum": ["plus", "random"]},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_range": {
                    "type": "array",
                    "items": {"type": "integer", "minimum": 1},
                    "minItems": 2,
                    "maxItems": 2,
                },
                "instances": {"type": "integer", "minimum": 1},
                "hamming_n": {"type": "integer", "minimum": 1},
                "hamming_instances": {"type": "integer", "minimum": 1},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "group": {"oneOf": [{"type": "null"}, _POSITIVE]},
                "quad": _POSITIVE,
                "crosscheck": _POSITIVE,
                "c0": _NONNEG,
            },
        },
    },
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "register": {
        "max_n": DEFAULT_MAX_N,
        "j": {"pattern": "zero"},
        "b": {"sampler": "uniform", "min": 0.5, "max": 1.5},
    },
    "env": {"beta": 1.0},
    "couplings": {"lambda1": 0.01, "lambda2": 0.01},
    "form1": {"p": -0.5, "prefactor": 1.0, "cutoff_scale": 2.0, "phase": 0.0},
    "form2": {"p": 0.5, "prefactor": 1.0, "cutoff_scale": 3.0, "phase": 0.0},
    "dynamics": {"times": None, "num_times": 200, "elements": None, "initial_state": "plus"},
    "sweep": {"n_range": [1, 6], "instances": 4, "hamming_n": 4, "hamming_instances": 50},
    "tolerances": {"group": None, "quad": 1e-10, "crosscheck": 1e-6, "c0": 1.0},
}


class ConfigError(InvalidInputError):
    """Configuration could not be parsed or failed validation."""


def _merge(defaults: dict, data: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key not in ("j", "b"):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _field_path(error: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def validate_document(data: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{_field_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    validate_document(data)
    return data


def load_config(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, str(path))


def resolve(data: dict[str, Any], seed: int | None = None, tol: float | None = None) -> dict[str, Any]:
    """Fill defaults, apply overrides and pin the seed; the result resolves to itself."""
    validate_document(data)
    cfg = _merge(DEFAULTS, data)
    if seed is not None:
        cfg["seed"] = int(seed)
    if tol is not None:
        cfg["tolerances"]["crosscheck"] = float(tol)
    b = cfg["register"]["b"]
    if isinstance(b, dict):
        b = {"sampler": "uniform", "min": 0.5, "max": 1.5, **b}
        if seed is not None or "seed" not in b:
            b["seed"] = cfg["seed"]
        cfg["register"]["b"] = b
    validate_document(cfg)
    return cfg


@dataclass(frozen=True)
class RunConfig:
    """A resolved configuration and the model objects derived from it."""

    data: dict[str, Any]

    @classmethod
    def from_dict(cls, data: dict[str, Any], seed: int | None = None, tol: float | None = None) -> "RunConfig":
        return cls(resolve(data, seed=seed, tol=tol))

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def n(self) -> int:
        return int(self.data["register"]["n"])

    @property
    def max_n(self) -> int:
        return int(self.data["register"]["max_n"])

    @property
    def tolerances(self) -> dict[str, Any]:
        return self.data["tolerances"]

    def form(self, which: int) -> FormFactor:
        return FormFactor.from_dict(self.data[f"form{which}"])

    def b_fields(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        b = self.data["register"]["b"]
        if isinstance(b, list):
            if len(b) != n:
                raise ConfigError(f"register.b: expected {n} fields, got {len(b)}")
            return np.array(b, dtype=float)
        if b["min"] > b["max"]:
            raise ConfigError("register.b: min exceeds max")
        rng = np.random.default_rng(b["seed"])
        return rng.uniform(b["min"], b["max"], n)

    def j_matrix(self, n: int | None = None) -> np.ndarray:
        n = self.n if n is None else n
        coupling = self.data["register"]["j"]
        if coupling["pattern"] == "zero":
            return np.zeros((n, n))
        if coupling["pattern"] == "nearest_neighbour":
            j = np.zeros((n, n))
            for k in range(n - 1):
                j[k, k + 1] = coupling["value"]
            if n >= 3:
                j[n - 1, 0] = coupling["value"]
            return j
        m = np.array(coupling["matrix"], dtype=float)
        if m.shape != (n, n):
            raise ConfigError(f"register.j.matrix: expected shape ({n}, {n}), got {m.shape}")
        return m

    def params(self, n: int | None = None) -> RegisterParams:
        c = self.data["couplings"]
        return RegisterParams(
            j_matrix=self.j_matrix(n),
            b_fields=self.b_fields(n),
            beta=self.data["env"]["beta"],
            lambda1=c["lambda1"],
            lambda2=c["lambda2"],
            form1=self.form(1),
            form2=self.form(2),
        )

    def sampler_bounds(self) -> tuple[float, float]:
        b = self.data["register"]["b"]
        if isinstance(b, list):
            return 0.5, 1.5
        return float(b["min"]), float(b["max"])


def parse_element(text: str, n: int) -> tuple[int, int]:
    """Parse ``"+-|-+"``, ``"+-:-+"`` or ``"+--+"`` into configuration indices."""
    from .register import config_index

    raw = text.strip()
    for sep in ("|", ":", " "):
        if sep in raw:
            left, right = raw.split(sep, 1)
            break
    else:
        if len(raw) != 2 * n:
            raise ConfigError(f"element {text!r} must have {2 * n} spin characters")
        left, right = raw[:n], raw[n:]
    try:
        sigma, tau = str_to_spins(left.strip()), str_to_spins(right.strip())
    except InvalidInputError as exc:
        raise ConfigError(str(exc)) from exc
    if len(sigma) != n or len(tau) != n:
        raise ConfigError(f"element {text!r} does not match register size {n}")
    return config_index(sigma), config_index(tau)


def parse_n_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(".."))
    except ValueError as exc:
        raise ConfigError(f"--n-range must look like A..B, got {text!r}") from exc
    if lo < 1 or hi < lo:
        raise ConfigError(f"--n-range needs 1 <= A <= B, got {text!r}")
    return lo, hi
