"""Run-config files: strict parsing, defaulting, echoing, backend building.

A run config is one JSON document with four sections (engine, schedule,
backend, output).  Unknown keys anywhere are rejected so typos fail loudly
instead of silently running defaults.  The parsed result can be echoed
back to JSON with every default materialized; loading the echo reproduces
the run exactly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import AdapterSpec, read_latent
from .editor import EditConfig
from .predictor import GaussianConceptModel, PredictorBackend
from .remote import DuplicateConditionError, RemoteBackend
from .schedule import (
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_SCHEDULE_KIND,
    DEFAULT_T,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    build_noise_schedule,
)

BACKEND_URL_ENV = "CDS_BACKEND_URL"


class ConfigError(ValueError):
    pass


def _check_keys(section: dict, known: set, where: str) -> None:
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _get(section: dict, key: str, default, types, where: str):
    value = section.get(key, default)
    if value is not None and not isinstance(value, types):
        raise ConfigError(f"{where}.{key} has wrong type {type(value).__name__}")
    return value


def _parse_adapters(raw, where: str) -> tuple[AdapterSpec, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError(f"{where} must be a list of adapter objects")
    specs = []
    for i, item in enumerate(raw):
        if not isinstance(item, dict):
            raise ConfigError(f"{where}[{i}] must be an object with id/scale")
        _check_keys(item, {"id", "scale"}, f"{where}[{i}]")
        if "id" not in item:
            raise ConfigError(f"{where}[{i}] is missing 'id'")
        try:
            specs.append(AdapterSpec(id=item["id"], scale=float(item.get("scale", 0.8))))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}[{i}]: {exc}") from exc
    return tuple(specs)


def _parse_patch(raw, where: str) -> tuple[int, int]:
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return (int(raw), int(raw))
    if isinstance(raw, list) and len(raw) == 2:
        return (int(raw[0]), int(raw[1]))
    raise ConfigError(f"{where} must be an integer or a [h, w] pair")


@dataclass(frozen=True)
class RunSetup:
    """A fully resolved run: engine config plus backend and output choices."""

    cfg: EditConfig
    backend_kind: str
    backend_url: str | None
    model_spec: dict | None
    output_dir: Path
    dump_gradients: bool
    schedule_params: dict

    def effective_dict(self) -> dict:
        """Every field explicit; loading this dict reproduces the run."""
        cfg = self.cfg
        engine = {
            "source_cond": cfg.source_cond,
            "target_cond": cfg.target_cond,
            "negative_cond": cfg.negative_cond,
            "target_adapters": [{"id": s.id, "scale": s.scale}
                                for s in cfg.target_adapters],
            "source_adapters": [{"id": s.id, "scale": s.scale}
                                for s in cfg.source_adapters],
            "steps": cfg.steps,
            "eta": cfg.eta,
            "lambda": cfg.guidance_scale,
            "tau": cfg.tau,
            "patch": list(cfg.patch),
            "learning_rate": cfg.learning_rate,
            "shared_noise": cfg.shared_noise,
            "regularizer_mode": cfg.regularizer_mode,
            "w_t": cfg.w_t,
            "seed": cfg.seed,
            "max_workers": cfg.max_workers,
        }
        backend = {"kind": self.backend_kind}
        if self.backend_url is not None:
            backend["url"] = self.backend_url
        if self.model_spec is not None:
            backend["model_spec"] = self.model_spec
        return {
            "engine": engine,
            "schedule": dict(self.schedule_params),
            "backend": backend,
            "output": {"dir": str(self.output_dir),
                       "dump_gradients": self.dump_gradients},
        }


ENGINE_KEYS = {
    "source_cond", "target_cond", "negative_cond", "target_adapters",
    "source_adapters", "steps", "eta", "lambda", "guidance_scale", "tau",
    "patch", "learning_rate", "shared_noise", "regularizer_mode", "w_t",
    "seed", "max_workers",
}
SCHEDULE_KEYS = {"kind", "T", "beta_start", "beta_end", "t_max", "t_min"}
BACKEND_KEYS = {"kind", "url", "model_spec"}
OUTPUT_KEYS = {"dir", "dump_gradients"}


def parse_config(doc: dict, base_dir: Path, backend_url_flag: str | None = None,
                 out_flag: str | None = None,
                 dump_gradients_flag: bool = False) -> RunSetup:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(doc, {"engine", "schedule", "backend", "output"}, "config")
    engine = doc.get("engine")
    if not isinstance(engine, dict):
        raise ConfigError("config needs an 'engine' section")
    backend = doc.get("backend")
    if not isinstance(backend, dict):
        raise ConfigError("config needs a 'backend' section")
    schedule = doc.get("schedule", {})
    output = doc.get("output", {})
    if not isinstance(schedule, dict):
        raise ConfigError("'schedule' must be an object")
    if not isinstance(output, dict):
        raise ConfigError("'output' must be an object")
    _check_keys(engine, ENGINE_KEYS, "engine")
    _check_keys(schedule, SCHEDULE_KEYS, "schedule")
    _check_keys(backend, BACKEND_KEYS, "backend")
    _check_keys(output, OUTPUT_KEYS, "output")

    sched_params = {
        "kind": _get(schedule, "kind", DEFAULT_SCHEDULE_KIND, str, "schedule"),
        "T": int(_get(schedule, "T", DEFAULT_T, (int,), "schedule")),
        "beta_start": float(_get(schedule, "beta_start", DEFAULT_BETA_START,
                                 (int, float), "schedule")),
        "beta_end": float(_get(schedule, "beta_end", DEFAULT_BETA_END,
                               (int, float), "schedule")),
        "t_max": int(_get(schedule, "t_max", DEFAULT_T_MAX, (int,), "schedule")),
        "t_min": int(_get(schedule, "t_min", DEFAULT_T_MIN, (int,), "schedule")),
    }
    try:
        sched = build_noise_schedule(sched_params["kind"], sched_params["T"],
                                     sched_params["beta_start"],
                                     sched_params["beta_end"])
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc

    for required in ("source_cond", "target_cond", "negative_cond"):
        if required not in engine:
            raise ConfigError(f"engine.{required} is required")
    if "lambda" in engine and "guidance_scale" in engine:
        raise ConfigError("engine has both 'lambda' and 'guidance_scale'; pick one")
    guidance = engine.get("lambda", engine.get("guidance_scale", 10.0))
    seed = _get(engine, "seed", 0, (int,), "engine")
    if isinstance(seed, bool):
        raise ConfigError("engine.seed must be an integer")
    try:
        cfg = EditConfig(
            source_cond=engine["source_cond"],
            target_cond=engine["target_cond"],
            negative_cond=engine["negative_cond"],
            target_adapters=_parse_adapters(engine.get("target_adapters"),
                                            "engine.target_adapters"),
            source_adapters=_parse_adapters(engine.get("source_adapters"),
                                            "engine.source_adapters"),
            steps=int(_get(engine, "steps", 300, (int,), "engine")),
            t_max=sched_params["t_max"],
            t_min=sched_params["t_min"],
            eta=float(_get(engine, "eta", 0.5, (int, float), "engine")),
            guidance_scale=float(guidance),
            tau=float(_get(engine, "tau", 0.002, (int, float), "engine")),
            patch=_parse_patch(engine.get("patch", [2, 2]), "engine.patch"),
            learning_rate=float(_get(engine, "learning_rate", 0.2,
                                     (int, float), "engine")),
            shared_noise=bool(_get(engine, "shared_noise", True, bool, "engine")),
            regularizer_mode=_get(engine, "regularizer_mode", "l2_signed",
                                  str, "engine"),
            w_t=_get(engine, "w_t", "constant", str, "engine"),
            seed=seed,
            max_workers=int(_get(engine, "max_workers", 1, (int,), "engine")),
            schedule=sched,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"engine: {exc}") from exc

    kind = backend.get("kind")
    if kind not in ("analytic", "remote"):
        raise ConfigError(f"backend.kind must be 'analytic' or 'remote', got {kind!r}")
    model_spec = backend.get("model_spec")
    url = backend.get("url")
    if kind == "analytic":
        if not isinstance(model_spec, dict):
            raise ConfigError("analytic backend requires backend.model_spec")
        model_spec = _resolve_model_spec_paths(model_spec, base_dir)
        url = None
    else:
        url = url or backend_url_flag or os.environ.get(BACKEND_URL_ENV)
        if not url:
            raise ConfigError(
                "remote backend needs a url (backend.url, --backend-url, "
                f"or ${BACKEND_URL_ENV})")
        if model_spec is not None and not isinstance(model_spec, dict):
            raise ConfigError("backend.model_spec must be an object")

    out_dir = out_flag or _get(output, "dir", "out", str, "output")
    dump = bool(output.get("dump_gradients", False)) or dump_gradients_flag
    return RunSetup(cfg=cfg, backend_kind=kind, backend_url=url,
                    model_spec=model_spec, output_dir=Path(out_dir),
                    dump_gradients=dump, schedule_params=sched_params)


def load_config(path, backend_url_flag: str | None = None,
                out_flag: str | None = None,
                dump_gradients_flag: bool = False) -> RunSetup:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return parse_config(doc, p.parent.resolve(), backend_url_flag,
                        out_flag, dump_gradients_flag)


def write_effective_config(setup: RunSetup, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(setup.effective_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# analytic model building


FIELD_KINDS = ("zeros", "constant", "rect", "cdst")


def _region(raw, height: int, width: int, where: str):
    if (not isinstance(raw, list)) or len(raw) != 4:
        raise ConfigError(f"{where}.region must be [h0, h1, w0, w1]")
    h0, h1, w0, w1 = (int(v) for v in raw)
    if not (0 <= h0 < h1 <= height and 0 <= w0 < w1 <= width):
        raise ConfigError(f"{where}.region {raw} outside the {height}x{width} plane")
    return h0, h1, w0, w1


def build_field(spec, shape: tuple[int, int, int], base_dir: Path,
                where: str) -> np.ndarray:
    """Field spec -> float64 (C, H, W) array.

    A bare number means a constant field; objects pick a kind from
    zeros | constant | rect | cdst.
    """
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full(shape, float(spec), dtype=np.float64)
    if not isinstance(spec, dict):
        raise ConfigError(f"{where} must be a number or an object with 'kind'")
    kind = spec.get("kind")
    if kind == "zeros":
        _check_keys(spec, {"kind"}, where)
        return np.zeros(shape, dtype=np.float64)
    if kind == "constant":
        _check_keys(spec, {"kind", "value"}, where)
        return np.full(shape, float(spec["value"]), dtype=np.float64)
    if kind == "rect":
        _check_keys(spec, {"kind", "value", "region"}, where)
        h0, h1, w0, w1 = _region(spec.get("region"), shape[1], shape[2], where)
        out = np.zeros(shape, dtype=np.float64)
        out[:, h0:h1, w0:w1] = float(spec["value"])
        return out
    if kind == "cdst":
        _check_keys(spec, {"kind", "path"}, where)
        p = Path(spec.get("path", ""))
        if not p.is_absolute():
            p = base_dir / p
        arr = read_latent(p).astype(np.float64)
        if arr.shape != shape:
            raise ConfigError(f"{where}: tensor {p} has shape {arr.shape}, "
                              f"model shape is {shape}")
        return arr
    raise ConfigError(f"{where}.kind must be one of {FIELD_KINDS}, got {kind!r}")


MODEL_SPEC_KEYS = {"shape", "sigma2", "base_mean", "conditions", "adapters"}


def _resolve_model_spec_paths(spec: dict, base_dir: Path) -> dict:
    """Make cdst paths absolute so the echoed config reloads from anywhere."""

    def fix(value):
        if isinstance(value, dict) and value.get("kind") == "cdst" and "path" in value:
            p = Path(value["path"])
            if not p.is_absolute():
                p = base_dir / p
            return {**value, "path": str(p)}
        return value

    out = dict(spec)
    if isinstance(out.get("base_mean"), dict):
        out["base_mean"] = fix(out["base_mean"])
    conds = out.get("conditions")
    if isinstance(conds, dict):
        out["conditions"] = {k: fix(v) for k, v in conds.items()}
    return out


def build_analytic_backend(setup: RunSetup) -> GaussianConceptModel:
    spec = setup.model_spec
    base_dir = Path(".")  # paths were made absolute at parse time
    _check_keys(spec, MODEL_SPEC_KEYS, "backend.model_spec")
    raw_shape = spec.get("shape")
    if (not isinstance(raw_shape, list)) or len(raw_shape) != 3:
        raise ConfigError("model_spec.shape must be [C, H, W]")
    shape = tuple(int(v) for v in raw_shape)
    sigma2 = spec.get("sigma2")
    if not isinstance(sigma2, (int, float)) or isinstance(sigma2, bool):
        raise ConfigError("model_spec.sigma2 must be a positive number")
    conds_spec = spec.get("conditions")
    if not isinstance(conds_spec, dict) or not conds_spec:
        raise ConfigError("model_spec.conditions must map names to fields")
    conditions = {name: build_field(f, shape, base_dir,
                                    f"model_spec.conditions[{name!r}]")
                  for name, f in conds_spec.items()}
    adapters = {}
    for aid, aspec in (spec.get("adapters") or {}).items():
        if not isinstance(aspec, dict):
            raise ConfigError(f"model_spec.adapters[{aid!r}] must be an object")
        _check_keys(aspec, {"region", "value"}, f"model_spec.adapters[{aid!r}]")
        h0, h1, w0, w1 = _region(aspec.get("region"), shape[1], shape[2],
                                 f"model_spec.adapters[{aid!r}]")
        delta = np.zeros(shape, dtype=np.float64)
        delta[:, h0:h1, w0:w1] = float(aspec.get("value", 0.0))
        mask = np.zeros(shape[1:], dtype=bool)
        mask[h0:h1, w0:w1] = True
        adapters[aid] = (delta, mask)
    base_mean = build_field(spec.get("base_mean", {"kind": "zeros"}), shape,
                            base_dir, "model_spec.base_mean")
    try:
        return GaussianConceptModel(mu_base=base_mean, sigma2=float(sigma2),
                                    schedule=setup.cfg.schedule,
                                    conditions=conditions, adapters=adapters)
    except ValueError as exc:
        raise ConfigError(f"model_spec: {exc}") from exc


def build_backend(setup: RunSetup, on_warn=None) -> PredictorBackend:
    """Construct the configured backend; remote conditions get registered."""
    if setup.backend_kind == "analytic":
        return build_analytic_backend(setup)
    rb = RemoteBackend(setup.backend_url)
    spec = setup.model_spec or {}
    _check_keys(spec, {"conditions"}, "backend.model_spec")
    for name, cs in (spec.get("conditions") or {}).items():
        if not isinstance(cs, dict):
            raise ConfigError(f"model_spec.conditions[{name!r}] must be an object")
        _check_keys(cs, {"text", "negative"}, f"model_spec.conditions[{name!r}]")
        if "text" not in cs:
            raise ConfigError(f"model_spec.conditions[{name!r}] needs 'text'")
        try:
            rb.register_condition(name, cs["text"], bool(cs.get("negative", False)))
        except DuplicateConditionError:
            if on_warn is not None:
                on_warn(f"condition {name!r} already registered; reusing it")
    return rb
