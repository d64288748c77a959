"""Built-in experiment configurations."""

from __future__ import annotations

import copy

from .config import SCHEMA_VERSION, ExperimentConfig
from .errors import UsageError

# the two matrices of the i.i.d. 2x2 cocycle, each drawn with probability 1/2
IID_MATRICES = (
    ((2.0, 1.0), (1.0, 1.0)),
    ((1.1, 0.0), (1.1, 1.0)),
)


def _pairs(matrix):
    return [[[float(v), 0.0] for v in row] for row in matrix]


_PRESETS = {
    "odometer-counterexample": {
        "schema": SCHEMA_VERSION,
        "name": "odometer-counterexample",
        "cocycle": {
            "base": {"kind": "odometer", "params": {"bits": 76}},
            "generator": {"kind": "odometer_counterexample",
                          "params": {"cells": 64, "weight_exponent": 2.0}},
        },
        "horizons": [2 ** k for k in range(6, 13)],
        "seeds": list(range(8)),
        "thresholds": [0.0],
        "growth": {"xi": "identity", "eps": 0.05},
        "criteria": [
            {"kind": "limit_operator_l2", "tolerance": 0.05},
            {"kind": "drift", "tolerance": 0.05},
            {"kind": "smooth_growth", "tolerance": 0.05},
        ],
        "output": {"dir": "ncmet-out", "prefix": "odometer-counterexample", "plots": False},
        "parallelism": 4,
    },
    "classical-oseledets-2x2": {
        "schema": SCHEMA_VERSION,
        "name": "classical-oseledets-2x2",
        "algebra": {"blocks": [{"kind": "factor", "n": 2, "weight": 0.5}]},
        "cocycle": {
            "base": {"kind": "bernoulli", "params": {"probabilities": [0.5, 0.5]}},
            "generator": {"kind": "iid_random",
                          "params": {"matrices": [[_pairs(m)] for m in IID_MATRICES]}},
        },
        "horizons": [500, 1000, 2000, 5000, 10000],
        "seeds": list(range(16)),
        "thresholds": [0.0],
        "growth": {"xi": "identity", "eps": 0.05},
        "criteria": [
            {"kind": "lyapunov_oracle", "tolerance": 1e-2},
            {"kind": "determinant_gap", "tolerance": 1e-2, "horizon": 500},
            {"kind": "invariance_measure", "tolerance": 5e-2},
        ],
        "output": {"dir": "ncmet-out", "prefix": "classical-oseledets-2x2", "plots": False},
        "parallelism": 4,
    },
}


def preset_names() -> list:
    return sorted(_PRESETS)


def preset_data(name: str) -> dict:
    try:
        return copy.deepcopy(_PRESETS[name])
    except KeyError:
        raise UsageError(f"unknown preset {name!r}; choose from {', '.join(preset_names())}") from None


def preset(name: str) -> ExperimentConfig:
    return ExperimentConfig.from_json(preset_data(name))
