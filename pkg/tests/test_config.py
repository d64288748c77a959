import copy
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncmet.config import SCHEMA_VERSION, ExperimentConfig
from ncmet.errors import ConfigurationError
from ncmet.presets import preset, preset_data, preset_names

BASE = {
    "schema": SCHEMA_VERSION,
    "cocycle": {
        "base": {"kind": "odometer", "params": {"bits": 24}},
        "generator": {"kind": "odometer_counterexample", "params": {"cells": 8}},
    },
    "horizons": [8, 16],
    "seeds": [0, 1],
}


def _with(mutate):
    data = copy.deepcopy(BASE)
    mutate(data)
    return data


class TestValidation:
    def test_defaults_filled(self):
        cfg = ExperimentConfig.from_json(BASE)
        assert cfg["output"]["prefix"] == "run"
        assert cfg["growth"]["xi"] == "identity"
        assert cfg["parallelism"] == 1

    @pytest.mark.parametrize("mutate, path", [
        (lambda d: d.update(seeds=[]), "seeds"),
        (lambda d: d.update(seeds=[1, 1]), "seeds"),
        (lambda d: d.update(extra=1), "<root>"),
        (lambda d: d.update(schema="ncmet.experiment/0"), "schema"),
        (lambda d: d.update(horizons=[16, 8]), "horizons"),
        (lambda d: d["cocycle"]["base"]["params"].update(bits=0), "cocycle.base.params.bits"),
        (lambda d: d["cocycle"]["generator"]["params"].update(cells="x"), "cocycle.generator.params.cells"),
        (lambda d: d["cocycle"]["generator"].update(kind="nope"), "cocycle.generator.kind"),
        (lambda d: d.update(criteria=[{"kind": "drift", "tolerance": -1}]), "criteria[0].tolerance"),
        (lambda d: d["cocycle"]["generator"]["params"].update(cells=16), "cocycle"),
    ])
    def test_errors_name_the_field(self, mutate, path):
        with pytest.raises(ConfigurationError) as err:
            ExperimentConfig.from_json(_with(mutate))
        assert str(err.value).startswith(path)

    def test_algebra_required(self):
        data = {**BASE, "cocycle": {"base": {"kind": "rotation", "params": {}},
                                    "generator": {"kind": "diagonal_function", "params": {"amplitude": 1.0}}}}
        with pytest.raises(ConfigurationError, match="algebra"):
            ExperimentConfig.from_json(data)

    def test_duplicate_criterion_names(self):
        data = _with(lambda d: d.update(criteria=[{"kind": "drift", "tolerance": 1.0}] * 2))
        with pytest.raises(ConfigurationError, match="unique"):
            ExperimentConfig.from_json(data)

    def test_load_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigurationError):
            ExperimentConfig.load(p)


class TestRoundTrip:
    @pytest.mark.parametrize("name", preset_names())
    def test_presets(self, name):
        cfg = preset(name)
        assert ExperimentConfig.from_json(json.loads(cfg.dumps())) == cfg

    @settings(max_examples=25, deadline=None)
    @given(horizons=st.lists(st.integers(1, 10 ** 6), min_size=1, max_size=6, unique=True),
           seeds=st.lists(st.integers(0, 10 ** 6), min_size=1, max_size=6, unique=True),
           eps=st.floats(1e-6, 10.0))
    def test_generated(self, horizons, seeds, eps):
        data = _with(lambda d: d.update(horizons=sorted(horizons), seeds=seeds,
                                        growth={"eps": eps}))
        cfg = ExperimentConfig.from_json(data)
        again = ExperimentConfig.from_json(json.loads(cfg.dumps()))
        assert again == cfg
        assert again["growth"]["eps"] == eps

    def test_preset_data_is_a_copy(self):
        data = preset_data("odometer-counterexample")
        data["seeds"].append(99)
        assert 99 not in preset_data("odometer-counterexample")["seeds"]


class TestSystems:
    def test_iid_system(self):
        sys = preset("classical-oseledets-2x2").build_system()
        assert len(sys.metadata["matrices"]) == 2

    def test_constant_system(self):
        data = {
            "schema": SCHEMA_VERSION,
            "algebra": {"blocks": [{"kind": "factor", "n": 2, "weight": 0.5}]},
            "cocycle": {"base": {"kind": "rotation", "params": {}},
                        "generator": {"kind": "constant", "params": {
                            "element": [[[[2.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]]}}},
            "horizons": [4],
            "seeds": [0],
        }
        sys = ExperimentConfig.from_json(data).build_system()
        assert sys.name == "constant"

    def test_bad_element_shape(self):
        data = {
            "schema": SCHEMA_VERSION,
            "algebra": {"blocks": [{"kind": "factor", "n": 2}]},
            "cocycle": {"base": {"kind": "rotation", "params": {}},
                        "generator": {"kind": "constant", "params": {"element": [[[1.0, 0.0]]]}}},
            "horizons": [4],
            "seeds": [0],
        }
        with pytest.raises(ConfigurationError, match="cocycle.generator.params.element"):
            ExperimentConfig.from_json(data)
