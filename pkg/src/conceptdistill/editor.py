"""The end-to-end editing loop, sweep runner, and objective comparison.

One run walks a strictly descending timestep plan.  At every step both
branches are noised with seeded Gaussian draws, the source and target
noise predictions are formed (the target side through dynamic adapter
weighting when adapters are configured), and the latent takes one descent
step on the chosen objective.  Everything is recorded in a trace.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import AdapterSpec, ShapeMismatchError, as_latent, write_latent
from .distill import (
    GradConfig,
    apply_update,
    cds_grad,
    dds_grad,
    resolve_weight,
    sds_grad,
)
from .predictor import BackendError, PredictorBackend, guided_predict, predict
from .schedule import (
    DEFAULT_BETA_END,
    DEFAULT_BETA_START,
    DEFAULT_SCHEDULE_KIND,
    DEFAULT_T,
    DEFAULT_T_MAX,
    DEFAULT_T_MIN,
    NoiseSchedule,
    add_noise,
    build_noise_schedule,
    plan_timesteps,
)
from .weighting import (
    DEFAULT_PATCH,
    DEFAULT_TAU,
    dynamic_weighted_predict,
    weight_entropy,
)

OBJECTIVES = ("sds", "dds", "cds")


def default_schedule() -> NoiseSchedule:
    return build_noise_schedule(DEFAULT_SCHEDULE_KIND, DEFAULT_T,
                                DEFAULT_BETA_START, DEFAULT_BETA_END)


class BackendStepFailure(RuntimeError):
    """A predictor call failed mid-run; carries the step index and timestep."""

    def __init__(self, step: int, t: int, cause: Exception):
        super().__init__(f"backend failure at step {step} (t={t}): {cause}")
        self.step = step
        self.t = t
        self.cause = cause


@dataclass(frozen=True)
class EditConfig:
    """Full parameterization of one edit run."""

    source_cond: str
    target_cond: str
    negative_cond: str
    target_adapters: tuple[AdapterSpec, ...] = ()
    source_adapters: tuple[AdapterSpec, ...] = ()
    steps: int = 300
    t_max: int = DEFAULT_T_MAX
    t_min: int = DEFAULT_T_MIN
    eta: float = 0.5
    guidance_scale: float = 10.0
    tau: float = DEFAULT_TAU
    patch: tuple[int, int] = DEFAULT_PATCH
    learning_rate: float = 0.2
    shared_noise: bool = True
    regularizer_mode: str = "l2_signed"
    w_t: object = "constant"
    seed: int = 0
    max_workers: int = 1
    schedule: NoiseSchedule = field(default_factory=default_schedule)

    def __post_init__(self):
        for name in ("source_cond", "target_cond", "negative_cond"):
            value = getattr(self, name)
            if not isinstance(value, str) or not value:
                raise ValueError(f"{name} must be a non-empty string")
        object.__setattr__(self, "target_adapters", tuple(self.target_adapters))
        object.__setattr__(self, "source_adapters", tuple(self.source_adapters))
        for spec in self.target_adapters + self.source_adapters:
            if not isinstance(spec, AdapterSpec):
                raise TypeError(f"adapter entries must be AdapterSpec, got {type(spec)}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not 1 <= self.t_min <= self.t_max <= self.schedule.T:
            raise ValueError(
                f"need 1 <= t_min <= t_max <= {self.schedule.T}, "
                f"got ({self.t_min}, {self.t_max})")
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        patch = (int(self.patch[0]), int(self.patch[1]))
        if min(patch) < 1:
            raise ValueError(f"patch must be positive, got {patch}")
        object.__setattr__(self, "patch", patch)
        if self.max_workers < 1:
            raise ValueError(f"max_workers must be >= 1, got {self.max_workers}")
        if not isinstance(self.seed, int):
            raise TypeError(f"seed must be an integer, got {type(self.seed)}")
        # eta / guidance / mode / lr / w_t share GradConfig's validation
        self.grad_config()

    def grad_config(self) -> GradConfig:
        return GradConfig(eta=self.eta, guidance_scale=self.guidance_scale,
                          regularizer_mode=self.regularizer_mode,
                          w_t=self.w_t, learning_rate=self.learning_rate)


@dataclass(frozen=True)
class StepRecord:
    step: int
    t: int
    grad_norm: float
    noise_delta_norm: float
    regularizer_norm: float
    weight_entropy: float
    dist_to_source: float


@dataclass(frozen=True)
class EditTrace:
    objective: str
    records: tuple[StepRecord, ...]

    @property
    def final_dist_to_source(self) -> float:
        return self.records[-1].dist_to_source

    @property
    def mean_weight_entropy(self) -> float:
        return float(np.mean([r.weight_entropy for r in self.records]))


def write_trace(trace: EditTrace, path) -> None:
    """One JSON object per line, one line per step."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trace.records:
            fh.write(json.dumps(dataclasses.asdict(rec)) + "\n")


def load_trace(path, objective: str = "") -> EditTrace:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(StepRecord(**json.loads(line)))
    return EditTrace(objective=objective, records=tuple(records))


def _norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x.astype(np.float64)))


def _run(cfg: EditConfig, backend: PredictorBackend, x0_src: np.ndarray,
         objective: str, dump_dir=None) -> tuple[np.ndarray, EditTrace]:
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; known: {OBJECTIVES}")
    src = as_latent(x0_src, copy=True)
    if src.shape != tuple(backend.shape):
        raise ShapeMismatchError(
            f"source latent shape {src.shape} vs backend shape {tuple(backend.shape)}")
    plan = plan_timesteps(cfg.steps, cfg.t_max, cfg.t_min)
    gcfg = cfg.grad_config()
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)

    executor = None
    if cfg.max_workers > 1:
        executor = ThreadPoolExecutor(max_workers=cfg.max_workers)
    x_tgt = src.copy()
    records = []
    try:
        for k, t in enumerate(plan):
            eps_tgt_noise = rng.standard_normal(src.shape, dtype=np.float32)
            if cfg.shared_noise:
                eps_src_noise = eps_tgt_noise
            else:
                eps_src_noise = rng.standard_normal(src.shape, dtype=np.float32)
            z_tgt = add_noise(x_tgt, eps_tgt_noise, t, cfg.schedule)
            z_src = add_noise(src, eps_src_noise, t, cfg.schedule)

            try:
                entropy = 0.0
                if cfg.target_adapters:
                    pos, wmap = dynamic_weighted_predict(
                        backend, cfg.target_adapters, z_tgt, t, cfg.target_cond,
                        cfg.patch, cfg.tau, executor=executor, return_weights=True)
                    entropy = weight_entropy(wmap.fields)
                    eps_hat_tgt = guided_predict(
                        backend, z_tgt, t, cfg.target_cond, cfg.negative_cond,
                        cfg.guidance_scale, pos_prediction=pos)
                else:
                    eps_hat_tgt = guided_predict(
                        backend, z_tgt, t, cfg.target_cond, cfg.negative_cond,
                        cfg.guidance_scale)
                if objective == "sds":
                    eps_hat_src = None
                else:
                    eps_hat_src = guided_predict(
                        backend, z_src, t, cfg.source_cond, cfg.negative_cond,
                        cfg.guidance_scale, adapters=cfg.source_adapters)
            except (BackendError, ShapeMismatchError) as exc:
                raise BackendStepFailure(k, t, exc) from exc

            if objective == "sds":
                result = sds_grad(eps_hat_tgt, eps_tgt_noise, t, cfg.w_t)
            elif objective == "dds":
                result = dds_grad(eps_hat_tgt, eps_hat_src, t, cfg.w_t)
            else:
                result = cds_grad(eps_hat_tgt, eps_hat_src, x_tgt, src, gcfg, t)

            if dump_dir is not None:
                write_latent(dump_dir / f"grad_step{k:04d}_t{t:04d}.cdst", result.grad)
            x_tgt = apply_update(x_tgt, result.grad, cfg.learning_rate, step=k)
            records.append(StepRecord(
                step=k, t=t,
                grad_norm=_norm(result.grad),
                noise_delta_norm=result.noise_delta_norm,
                regularizer_norm=result.regularizer_norm,
                weight_entropy=entropy,
                dist_to_source=_norm(x_tgt - src)))
    finally:
        if executor is not None:
            executor.shutdown(wait=True)
    return x_tgt, EditTrace(objective=objective, records=tuple(records))


def run_edit(cfg: EditConfig, backend: PredictorBackend, x0_src: np.ndarray,
             dump_dir=None) -> tuple[np.ndarray, EditTrace]:
    """Run the regularized delta objective end to end."""
    return _run(cfg, backend, x0_src, "cds", dump_dir=dump_dir)


def compare_objectives(cfg: EditConfig, backend: PredictorBackend,
                       x0_src: np.ndarray, dump_dir=None) -> dict:
    """Run all three objectives from identical seeds and starting latents.

    Returns {objective: (final latent, trace)}; when dump_dir is given each
    objective's per-step gradients land under its own subdirectory.
    """
    out = {}
    for objective in OBJECTIVES:
        sub = None if dump_dir is None else Path(dump_dir) / objective
        out[objective] = _run(cfg, backend, x0_src, objective, dump_dir=sub)
    return out


SWEEP_AXES = ("eta", "tau", "patch", "lr")


@dataclass(frozen=True)
class SweepRow:
    axis: str
    value: object
    dist_to_source: float = float("nan")
    dist_to_target: float = float("nan")
    weight_entropy: float = float("nan")
    error: str | None = None


def _with_axis(cfg: EditConfig, axis: str, value) -> EditConfig:
    if axis == "eta":
        return dataclasses.replace(cfg, eta=float(value))
    if axis == "tau":
        return dataclasses.replace(cfg, tau=float(value))
    if axis == "lr":
        return dataclasses.replace(cfg, learning_rate=float(value))
    if axis == "patch":
        if np.isscalar(value):
            patch = (int(value), int(value))
        else:
            patch = (int(value[0]), int(value[1]))
        return dataclasses.replace(cfg, patch=patch)
    raise ValueError(f"unknown sweep axis {axis!r}; known: {SWEEP_AXES}")


def target_distance(backend: PredictorBackend, cfg: EditConfig,
                    x: np.ndarray) -> float:
    """Distance from x to the backend's target concept mean, if it has one."""
    mean_fn = getattr(backend, "concept_mean", None)
    if mean_fn is None:
        return float("nan")
    ref = mean_fn(cfg.target_cond, cfg.target_adapters)
    return _norm(x.astype(np.float64) - ref)


def run_sweep(base_cfg: EditConfig, axis: str, values: Sequence,
              backend: PredictorBackend, x0_src: np.ndarray) -> list[SweepRow]:
    """One edit per value, identical seeds; failed cells are marked, not fatal."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; known: {SWEEP_AXES}")
    if len(values) < 1:
        raise ValueError("sweep needs at least one value")
    rows = []
    for value in values:
        try:
            cfg = _with_axis(base_cfg, axis, value)
            x_final, trace = run_edit(cfg, backend, x0_src)
            rows.append(SweepRow(
                axis=axis, value=value,
                dist_to_source=trace.final_dist_to_source,
                dist_to_target=target_distance(backend, cfg, x_final),
                weight_entropy=trace.mean_weight_entropy))
        except Exception as exc:
            rows.append(SweepRow(axis=axis, value=value, error=str(exc)))
    return rows
