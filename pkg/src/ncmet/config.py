"""Experiment configuration: JSON schema, validation and system construction."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .algebra import TracialAlgebra, algebra_from_json, algebra_to_json, element_from_json
from .dynamics import (
    GOLDEN_ROTATION,
    Bernoulli,
    CocycleSystem,
    Odometer,
    Rotation,
    build_counterexample_cocycle,
    constant_cocycle,
    diagonal_function_cocycle,
    iid_cocycle,
)
from .errors import ConfigurationError, NcmetError

SCHEMA_VERSION = "ncmet.experiment/1"

CRITERION_KINDS = (
    "limit_operator_l2",
    "drift",
    "lyapunov_oracle",
    "single_operator",
    "determinant_gap",
    "invariance_measure",
    "invariance_subspace",
    "smooth_growth",
)

_NESTED_PAIRS = {"type": "array"}  # ragged nesting of [re, im] pairs; shape checked on load

_ALGEBRA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["blocks"],
    "properties": {
        "blocks": {
            "type": "array",
            "minItems": 1,
            "items": {
                "oneOf": [
                    {"type": "object", "additionalProperties": False, "required": ["kind", "n"],
                     "properties": {"kind": {"const": "factor"},
                                    "n": {"type": "integer", "minimum": 1},
                                    "weight": {"type": "number", "exclusiveMinimum": 0}}},
                    {"type": "object", "additionalProperties": False, "required": ["kind", "weights"],
                     "properties": {"kind": {"const": "abelian"},
                                    "weights": {"type": "array", "minItems": 1,
                                                "items": {"type": "number", "exclusiveMinimum": 0}}}},
                ]
            },
        }
    },
}


def _params(props, required=()):
    return {"type": "object", "additionalProperties": False, "required": list(required),
            "properties": props}


def _tagged(variants):
    """Object ``{kind, params}`` whose params schema is selected by ``kind``."""
    return {"type": "object", "additionalProperties": False, "required": ["kind", "params"],
            "properties": {"kind": {"enum": list(variants)}, "params": {"type": "object"}},
            "allOf": [{"if": {"properties": {"kind": {"const": k}}},
                       "then": {"properties": {"params": v}}} for k, v in variants.items()]}


_BASE = _tagged({
    "odometer": _params({"bits": {"type": "integer", "minimum": 1}}, ["bits"]),
    "bernoulli": _params({"probabilities": {"type": "array", "minItems": 1,
                                            "items": {"type": "number", "minimum": 0}}},
                         ["probabilities"]),
    "rotation": _params({"alpha": {"type": "number"}}),
})

_GENERATOR = _tagged({
    "odometer_counterexample": _params({"cells": {"type": "integer", "minimum": 1},
                                        "weight_exponent": {"type": "number", "exclusiveMinimum": 0}},
                                       ["cells"]),
    "constant": _params({"element": {"type": "array", "minItems": 1, "items": _NESTED_PAIRS}},
                        ["element"]),
    "iid_random": _params({"matrices": {"type": "array", "minItems": 1,
                                        "items": {"type": "array", "minItems": 1, "items": _NESTED_PAIRS}}},
                          ["matrices"]),
    "diagonal_function": _params({"amplitude": {"type": "number"},
                                  "offsets": {"type": "array", "items": {"type": "number"}}},
                                 ["amplitude"]),
})

_CRITERION = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind", "tolerance"],
    "properties": {
        "kind": {"enum": list(CRITERION_KINDS)},
        "name": {"type": "string", "minLength": 1},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "horizon": {"type": "integer", "minimum": 1},
        "target": {"type": "number"},
        "threshold": {"type": "number"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "cocycle", "horizons", "seeds"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "algebra": _ALGEBRA,
        "cocycle": {"type": "object", "additionalProperties": False, "required": ["base", "generator"],
                    "properties": {"base": _BASE, "generator": _GENERATOR}},
        "horizons": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "seeds": {"type": "array", "minItems": 1, "uniqueItems": True,
                  "items": {"type": "integer", "minimum": 0}},
        "thresholds": {"type": "array", "items": {"type": "number"}},
        "growth": {"type": "object", "additionalProperties": False,
                   "properties": {"eps": {"type": "number", "exclusiveMinimum": 0},
                                  "xi": {"oneOf": [{"const": "identity"},
                                                   {"type": "array", "minItems": 1, "items": _NESTED_PAIRS}]}}},
        "criteria": {"type": "array", "items": _CRITERION},
        "output": {"type": "object", "additionalProperties": False,
                   "properties": {"dir": {"type": "string", "minLength": 1},
                                  "prefix": {"type": "string", "minLength": 1},
                                  "plots": {"type": "boolean"}}},
        "parallelism": {"type": "integer", "minimum": 1},
    },
}

_VALIDATOR = Draft202012Validator(SCHEMA)

DEFAULTS = {
    "name": "experiment",
    "thresholds": [],
    "growth": {"eps": 0.05, "xi": "identity"},
    "criteria": [],
    "output": {"dir": "ncmet-out", "prefix": "run", "plots": False},
    "parallelism": 1,
}


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out or "<root>"


def validate(data: dict) -> None:
    """Raise :class:`ConfigurationError` naming the offending field path."""
    errors = list(_VALIDATOR.iter_errors(data))
    if errors:
        # the deepest error names the most specific field
        err = max(errors, key=lambda e: (len(e.absolute_path), -len(e.message)))
        raise ConfigurationError(f"{_path(err.absolute_path)}: {err.message}")
    hs = data["horizons"]
    if any(b <= a for a, b in zip(hs, hs[1:])):
        raise ConfigurationError("horizons: must be strictly ascending")
    ts = data.get("thresholds", [])
    if any(b < a for a, b in zip(ts, ts[1:])):
        raise ConfigurationError("thresholds: must be sorted")
    for k, c in enumerate(data.get("criteria", [])):
        if c["kind"] == "determinant_gap" and c.get("horizon", hs[0]) not in hs:
            raise ConfigurationError(f"criteria[{k}].horizon: {c['horizon']} is not one of the horizons")


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated experiment with every default filled in."""

    data: dict = field(compare=True)

    @classmethod
    def from_json(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("<root>: config must be a JSON object")
        validate(data)
        resolved = copy.deepcopy(DEFAULTS)
        for key, value in data.items():
            if isinstance(value, dict) and isinstance(resolved.get(key), dict):
                resolved[key].update(copy.deepcopy(value))
            else:
                resolved[key] = copy.deepcopy(value)
        for c in resolved["criteria"]:
            c.setdefault("name", c["kind"])
        names = [c["name"] for c in resolved["criteria"]]
        if len(set(names)) != len(names):
            raise ConfigurationError("criteria: criterion names must be unique")
        ordered = {k: resolved[k] for k in SCHEMA["properties"] if k in resolved}
        cfg = cls(ordered)
        cfg.build_system()  # surfaces semantic errors (shapes, missing algebra) up front
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"<root>: invalid JSON ({exc})") from exc
        return cls.from_json(data)

    def to_json(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return json.dumps(self.data, indent=2)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def horizons(self) -> list:
        return list(self.data["horizons"])

    @property
    def seeds(self) -> list:
        return list(self.data["seeds"])

    def algebra(self) -> TracialAlgebra | None:
        return algebra_from_json(self.data["algebra"]) if "algebra" in self.data else None

    def build_system(self) -> CocycleSystem:
        try:
            return _build(self.data)
        except ConfigurationError:
            raise
        except (NcmetError, ValueError, KeyError, IndexError) as exc:
            raise ConfigurationError(f"cocycle.generator.params: {exc}") from exc

    def growth_vector(self, sys: CocycleSystem):
        xi = self.data["growth"]["xi"]
        if xi == "identity":
            return sys.algebra.identity()
        return _element(xi, sys.algebra, "growth.xi")


def _element(blocks, algebra, where):
    try:
        x = element_from_json({"blocks": blocks}, algebra)
    except (NcmetError, ValueError, IndexError) as exc:
        raise ConfigurationError(f"{where}: {exc}") from exc
    return x


def _build(data: dict) -> CocycleSystem:
    base_spec = data["cocycle"]["base"]
    gen = data["cocycle"]["generator"]
    algebra = algebra_from_json(data["algebra"]) if "algebra" in data else None
    kind, params = base_spec["kind"], base_spec["params"]
    if kind == "odometer":
        base = Odometer(params["bits"])
    elif kind == "bernoulli":
        base = Bernoulli(tuple(params["probabilities"]))
    else:
        base = Rotation(params.get("alpha", GOLDEN_ROTATION))

    gk, gp = gen["kind"], gen["params"]
    if gk == "odometer_counterexample":
        if not isinstance(base, Odometer):
            raise ConfigurationError("cocycle.base: the counterexample runs over an odometer")
        if algebra is not None:
            raise ConfigurationError("algebra: the counterexample builds its own abelian algebra; omit it")
        try:
            return build_counterexample_cocycle(base.bits, gp["cells"], gp.get("weight_exponent", 2.0))
        except ConfigurationError as exc:
            raise ConfigurationError(f"cocycle.base.params.bits: {exc}") from exc
    if algebra is None:
        raise ConfigurationError(f"algebra: required by generator kind {gk!r}")
    if gk == "constant":
        return constant_cocycle(base, _element(gp["element"], algebra, "cocycle.generator.params.element"))
    if gk == "iid_random":
        if not isinstance(base, Bernoulli):
            raise ConfigurationError("cocycle.base: iid_random needs a bernoulli base")
        mats = [_element(m, algebra, f"cocycle.generator.params.matrices[{k}]")
                for k, m in enumerate(gp["matrices"])]
        if len(mats) != len(base.probabilities):
            raise ConfigurationError("cocycle.generator.params.matrices: need one matrix per symbol")
        return iid_cocycle(mats, base.probabilities)
    offsets = gp.get("offsets")
    return diagonal_function_cocycle(base, algebra, gp["amplitude"],
                                     None if offsets is None else np.asarray(offsets))


def element_blocks_json(x) -> list:
    """The ``blocks`` payload used inside configs for an element."""
    from .algebra import element_to_json
    return element_to_json(x)["blocks"]


__all__ = ["SCHEMA", "SCHEMA_VERSION", "ExperimentConfig", "validate", "element_blocks_json",
           "algebra_to_json"]
