"""Run-config parsing: strict keys, defaults, echo round trips, model building."""

import json
from pathlib import Path

import numpy as np
import pytest

from conceptdistill.config import (
    BACKEND_URL_ENV,
    ConfigError,
    build_backend,
    build_field,
    load_config,
    parse_config,
    write_effective_config,
)
from conceptdistill.core import AdapterSpec, write_latent
from conceptdistill.editor import run_edit
from conceptdistill.predictor import GaussianConceptModel
from conceptdistill.remote import RemoteBackend

BASE = Path(".")


def _analytic_doc(**engine_extra):
    engine = {
        "source_cond": "src",
        "target_cond": "tgt",
        "negative_cond": "neg",
    }
    engine.update(engine_extra)
    return {
        "engine": engine,
        "backend": {
            "kind": "analytic",
            "model_spec": {
                "shape": [2, 4, 4],
                "sigma2": 0.04,
                "base_mean": 0.0,
                "conditions": {"src": 0.0, "tgt": 1.5, "neg": 0.0},
            },
        },
    }


def _remote_doc(url="http://localhost:9/"):
    doc = _analytic_doc()
    doc["backend"] = {"kind": "remote", "url": url}
    return doc


# -- defaults and sections ---------------------------------------------------


def test_minimal_config_fills_documented_defaults():
    setup = parse_config(_analytic_doc(), BASE)
    cfg = setup.cfg
    assert cfg.steps == 300
    assert cfg.eta == 0.5
    assert cfg.guidance_scale == 10.0
    assert cfg.tau == 0.002
    assert cfg.patch == (2, 2)
    assert cfg.learning_rate == 0.2
    assert cfg.shared_noise is True
    assert cfg.regularizer_mode == "l2_signed"
    assert cfg.w_t == "constant"
    assert cfg.seed == 0
    assert cfg.max_workers == 1
    assert cfg.t_max == 970 and cfg.t_min == 30
    assert cfg.schedule.T == 1000
    assert setup.schedule_params["kind"] == "scaled_linear"
    assert setup.schedule_params["beta_start"] == 0.00085
    assert setup.schedule_params["beta_end"] == 0.012
    assert setup.backend_kind == "analytic"
    assert setup.backend_url is None
    assert setup.output_dir == Path("out")
    assert setup.dump_gradients is False


def test_explicit_engine_values_survive():
    doc = _analytic_doc(steps=12, eta=0.05, tau=1.0, patch=[1, 4],
                        learning_rate=0.01, shared_noise=False,
                        regularizer_mode="l1_sign", seed=99, max_workers=3)
    doc["engine"]["lambda"] = 7.5
    cfg = parse_config(doc, BASE).cfg
    assert cfg.steps == 12
    assert cfg.eta == 0.05
    assert cfg.guidance_scale == 7.5
    assert cfg.tau == 1.0
    assert cfg.patch == (1, 4)
    assert cfg.learning_rate == 0.01
    assert cfg.shared_noise is False
    assert cfg.regularizer_mode == "l1_sign"
    assert cfg.seed == 99
    assert cfg.max_workers == 3


def test_schedule_section_feeds_engine_window():
    doc = _analytic_doc()
    doc["schedule"] = {"kind": "linear", "T": 100, "beta_start": 1e-4,
                       "beta_end": 0.02, "t_max": 90, "t_min": 10}
    setup = parse_config(doc, BASE)
    assert setup.cfg.t_max == 90 and setup.cfg.t_min == 10
    assert setup.cfg.schedule.T == 100
    assert setup.schedule_params["kind"] == "linear"


@pytest.mark.parametrize("mutate", [
    lambda d: d.setdefault("extra", {}),
    lambda d: d["engine"].setdefault("step", 5),
    lambda d: d.setdefault("schedule", {}).setdefault("Tmax", 1),
    lambda d: d["backend"].setdefault("host", "x"),
    lambda d: d.setdefault("output", {}).setdefault("folder", "x"),
])
def test_unknown_keys_rejected_per_section(mutate):
    doc = _analytic_doc()
    mutate(doc)
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(doc, BASE)


def test_missing_sections_rejected():
    with pytest.raises(ConfigError, match="engine"):
        parse_config({"backend": {"kind": "analytic"}}, BASE)
    with pytest.raises(ConfigError, match="backend"):
        parse_config({"engine": {}}, BASE)
    with pytest.raises(ConfigError):
        parse_config([], BASE)


@pytest.mark.parametrize("missing", ["source_cond", "target_cond", "negative_cond"])
def test_condition_names_required(missing):
    doc = _analytic_doc()
    del doc["engine"][missing]
    with pytest.raises(ConfigError, match=missing):
        parse_config(doc, BASE)


def test_lambda_and_guidance_scale_are_aliases():
    doc = _analytic_doc()
    doc["engine"]["guidance_scale"] = 3.0
    assert parse_config(doc, BASE).cfg.guidance_scale == 3.0
    doc = _analytic_doc()
    doc["engine"]["lambda"] = 4.0
    assert parse_config(doc, BASE).cfg.guidance_scale == 4.0
    doc["engine"]["guidance_scale"] = 4.0
    with pytest.raises(ConfigError, match="pick one"):
        parse_config(doc, BASE)


def test_type_errors_are_config_errors():
    with pytest.raises(ConfigError, match="seed"):
        parse_config(_analytic_doc(seed=True), BASE)
    with pytest.raises(ConfigError, match="engine.steps"):
        parse_config(_analytic_doc(steps="many"), BASE)
    doc = _analytic_doc()
    doc["schedule"] = {"T": 10.5}
    with pytest.raises(ConfigError, match="schedule.T"):
        parse_config(doc, BASE)
    with pytest.raises(ConfigError, match="patch"):
        parse_config(_analytic_doc(patch=[2, 2, 2]), BASE)
    with pytest.raises(ConfigError, match="engine"):
        parse_config(_analytic_doc(eta=-1.0), BASE)


def test_adapter_list_parsing():
    doc = _analytic_doc(target_adapters=[{"id": "a"},
                                         {"id": "b", "scale": 1.5}])
    doc["backend"]["model_spec"]["adapters"] = {
        "a": {"region": [0, 2, 0, 2], "value": 1.0},
        "b": {"region": [2, 4, 2, 4], "value": -1.0},
    }
    cfg = parse_config(doc, BASE).cfg
    assert [s.id for s in cfg.target_adapters] == ["a", "b"]
    assert cfg.target_adapters[0].scale == 0.8
    assert cfg.target_adapters[1].scale == 1.5

    with pytest.raises(ConfigError, match="missing 'id'"):
        parse_config(_analytic_doc(target_adapters=[{"scale": 1.0}]), BASE)
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(_analytic_doc(target_adapters=[{"id": "a", "weight": 1}]), BASE)
    with pytest.raises(ConfigError, match="scale"):
        parse_config(_analytic_doc(target_adapters=[{"id": "a", "scale": 3.0}]), BASE)


def test_scalar_patch_becomes_square():
    assert parse_config(_analytic_doc(patch=4), BASE).cfg.patch == (4, 4)


# -- backend resolution ------------------------------------------------------


def test_remote_url_resolution_order(monkeypatch):
    monkeypatch.setenv(BACKEND_URL_ENV, "http://env:1/")
    doc = _remote_doc(url="http://config:1/")
    assert parse_config(doc, BASE, backend_url_flag="http://flag:1/") \
        .backend_url == "http://config:1/"
    del doc["backend"]["url"]
    assert parse_config(doc, BASE, backend_url_flag="http://flag:1/") \
        .backend_url == "http://flag:1/"
    assert parse_config(doc, BASE).backend_url == "http://env:1/"
    monkeypatch.delenv(BACKEND_URL_ENV)
    with pytest.raises(ConfigError, match="url"):
        parse_config(doc, BASE)


def test_analytic_requires_model_spec():
    doc = _analytic_doc()
    del doc["backend"]["model_spec"]
    with pytest.raises(ConfigError, match="model_spec"):
        parse_config(doc, BASE)
    doc["backend"]["kind"] = "cloud"
    with pytest.raises(ConfigError, match="kind"):
        parse_config(doc, BASE)


def test_build_backend_kinds():
    backend = build_backend(parse_config(_analytic_doc(), BASE))
    assert isinstance(backend, GaussianConceptModel)
    assert backend.shape == (2, 4, 4)
    assert backend.conditions == frozenset({"src", "tgt", "neg"})
    # constructing the remote client needs no network traffic
    rb = build_backend(parse_config(_remote_doc(), BASE))
    assert isinstance(rb, RemoteBackend)


# -- output section and flag overrides ---------------------------------------


def test_output_flags_override_config():
    doc = _analytic_doc()
    doc["output"] = {"dir": "results", "dump_gradients": False}
    setup = parse_config(doc, BASE)
    assert setup.output_dir == Path("results")
    assert setup.dump_gradients is False
    setup = parse_config(doc, BASE, out_flag="elsewhere",
                         dump_gradients_flag=True)
    assert setup.output_dir == Path("elsewhere")
    assert setup.dump_gradients is True


# -- field builders ----------------------------------------------------------


def test_field_kinds(tmp_path):
    shape = (1, 2, 3)
    assert np.array_equal(build_field(2.5, shape, BASE, "f"),
                          np.full(shape, 2.5))
    assert np.array_equal(build_field({"kind": "zeros"}, shape, BASE, "f"),
                          np.zeros(shape))
    assert np.array_equal(
        build_field({"kind": "constant", "value": -1}, shape, BASE, "f"),
        np.full(shape, -1.0))
    rect = build_field({"kind": "rect", "value": 3.0,
                        "region": [0, 1, 1, 3]}, shape, BASE, "f")
    assert rect[0, 0, 0] == 0.0 and rect[0, 0, 1] == 3.0 and rect[0, 0, 2] == 3.0
    assert np.all(rect[0, 1, :] == 0.0)

    arr = np.arange(6, dtype=np.float32).reshape(shape)
    write_latent(tmp_path / "field.cdst", arr)
    loaded = build_field({"kind": "cdst", "path": "field.cdst"}, shape,
                         tmp_path, "f")
    assert np.array_equal(loaded, arr.astype(np.float64))

    with pytest.raises(ConfigError, match="shape"):
        build_field({"kind": "cdst", "path": "field.cdst"}, (1, 3, 2),
                    tmp_path, "f")
    with pytest.raises(ConfigError, match="kind"):
        build_field({"kind": "perlin"}, shape, BASE, "f")
    with pytest.raises(ConfigError, match="region"):
        build_field({"kind": "rect", "value": 1, "region": [0, 3, 0, 1]},
                    shape, BASE, "f")
    with pytest.raises(ConfigError):
        build_field("0.5", shape, BASE, "f")


def test_cdst_fields_resolve_relative_to_config(tmp_path):
    arr = np.linspace(-1, 1, 32, dtype=np.float32).reshape(2, 4, 4)
    write_latent(tmp_path / "mean.cdst", arr)
    doc = _analytic_doc()
    doc["backend"]["model_spec"]["base_mean"] = {"kind": "cdst",
                                                 "path": "mean.cdst"}
    (tmp_path / "run.json").write_text(json.dumps(doc), encoding="utf-8")
    setup = load_config(tmp_path / "run.json")
    stored = setup.model_spec["base_mean"]["path"]
    assert Path(stored).is_absolute()
    backend = build_backend(setup)
    assert np.array_equal(backend.concept_mean("src"), arr.astype(np.float64))


def test_analytic_adapter_regions_masked():
    doc = _analytic_doc()
    doc["backend"]["model_spec"]["adapters"] = {
        "blob": {"region": [0, 2, 0, 4], "value": 5.0}}
    backend = build_backend(parse_config(doc, BASE))
    mask = backend.adapter_mask("blob")
    assert mask[:2].all() and not mask[2:].any()
    mean = backend.concept_mean("src", [AdapterSpec(id="blob", scale=1.0)])
    assert np.all(mean[:, :2, :] == 5.0) and np.all(mean[:, 2:, :] == 0.0)


# -- file loading and the effective echo -------------------------------------


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)


def test_effective_echo_reproduces_run_bitwise(tmp_path):
    doc = _analytic_doc(steps=6, seed=11, learning_rate=0.1)
    doc["engine"]["lambda"] = 0.0
    doc["output"] = {"dir": str(tmp_path / "out")}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc), encoding="utf-8")

    setup = load_config(path)
    echo_path = tmp_path / "effective.json"
    write_effective_config(setup, echo_path)
    setup2 = load_config(echo_path)

    assert setup2.effective_dict() == setup.effective_dict()

    x0 = np.zeros((2, 4, 4), dtype=np.float32)
    run1 = run_edit(setup.cfg, build_backend(setup), x0)
    run2 = run_edit(setup2.cfg, build_backend(setup2), x0)
    assert np.array_equal(run1[0], run2[0])
    assert run1[1].records == run2[1].records


def test_effective_dict_materializes_every_engine_field():
    eff = parse_config(_analytic_doc(), BASE).effective_dict()
    assert set(eff) == {"engine", "schedule", "backend", "output"}
    engine = eff["engine"]
    assert engine["lambda"] == 10.0
    assert "guidance_scale" not in engine
    assert engine["steps"] == 300 and engine["patch"] == [2, 2]
    assert eff["schedule"]["T"] == 1000
    assert eff["output"] == {"dir": "out", "dump_gradients": False}
