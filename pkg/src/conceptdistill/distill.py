"""Gradient operators for latent optimization and the descent update.

Three objectives over noise predictions: plain score distillation, the
delta (target minus source) form, and the delta form with an eta-scaled
alignment regularizer between the optimized latent and the source latent.
The optimized variable is the latent itself, so the prediction Jacobian
is treated as the identity throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import LATENT_DTYPE, as_latent, sub

REGULARIZER_MODES = ("l2_signed", "l1_sign", "literal_abs")

# named w(t) presets accepted from config files
WEIGHT_PRESETS: dict[str, Callable[[int], float]] = {
    "constant": lambda t: 1.0,
}


def resolve_weight(w_t) -> Callable[[int], float]:
    """Named preset or callable -> callable."""
    if w_t is None:
        return WEIGHT_PRESETS["constant"]
    if callable(w_t):
        return w_t
    if w_t in WEIGHT_PRESETS:
        return WEIGHT_PRESETS[w_t]
    raise ValueError(f"unknown weight preset {w_t!r}; known: {sorted(WEIGHT_PRESETS)}")


class NumericalAbort(RuntimeError):
    """Optimization produced a non-finite latent."""


@dataclass(frozen=True)
class GradConfig:
    """Knobs of the regularized delta objective.

    guidance_scale rides along for the prediction stage; the gradient
    itself uses eta, the regularizer mode, and the w(t) preset.
    """

    eta: float = 0.5
    guidance_scale: float = 10.0
    regularizer_mode: str = "l2_signed"
    w_t: object = "constant"
    learning_rate: float = 0.2

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta >= 0.0):
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not math.isfinite(self.guidance_scale):
            raise ValueError(f"guidance_scale must be finite, got {self.guidance_scale}")
        if self.regularizer_mode not in REGULARIZER_MODES:
            raise ValueError(
                f"unknown regularizer_mode {self.regularizer_mode!r}; "
                f"known: {REGULARIZER_MODES}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        resolve_weight(self.w_t)

    def weight_at(self, t: int) -> float:
        return float(resolve_weight(self.w_t)(t))


@dataclass(frozen=True)
class GradResult:
    grad: np.ndarray
    noise_delta_norm: float
    regularizer_norm: float = 0.0


def _weighted_delta(eps_a: np.ndarray, eps_b: np.ndarray, wt: float) -> np.ndarray:
    delta = sub(eps_a, eps_b)
    # 1.0 * x is bitwise x, so the constant preset stays exact
    return (wt * delta.astype(np.float64)).astype(LATENT_DTYPE)


def sds_grad(eps_pred: np.ndarray, eps_sampled: np.ndarray, t: int,
             w_t=None) -> GradResult:
    """Score-distillation gradient: w(t) * (eps_pred - eps_sampled)."""
    wt = float(resolve_weight(w_t)(t))
    g = _weighted_delta(eps_pred, eps_sampled, wt)
    return GradResult(grad=g, noise_delta_norm=float(np.linalg.norm(g)))


def dds_grad(eps_tgt: np.ndarray, eps_src: np.ndarray, t: int,
             w_t=None) -> GradResult:
    """Delta gradient: w(t) * (eps_tgt - eps_src)."""
    wt = float(resolve_weight(w_t)(t))
    g = _weighted_delta(eps_tgt, eps_src, wt)
    return GradResult(grad=g, noise_delta_norm=float(np.linalg.norm(g)))


def _regularizer(x0_tgt: np.ndarray, x0_src: np.ndarray, eta: float,
                 mode: str) -> np.ndarray:
    delta = sub(x0_tgt, x0_src).astype(np.float64)
    if mode == "l2_signed":
        reg = eta * delta
    elif mode == "l1_sign":
        reg = eta * np.sign(delta)
    elif mode == "literal_abs":
        reg = eta * np.abs(delta)
    else:
        raise ValueError(f"unknown regularizer_mode {mode!r}")
    return reg.astype(LATENT_DTYPE)


def cds_grad(eps_tgt: np.ndarray, eps_src: np.ndarray,
             x0_tgt: np.ndarray, x0_src: np.ndarray,
             cfg: GradConfig, t: int) -> GradResult:
    """Regularized delta gradient.

    reg(eta, x0_tgt - x0_src) + w(t) * (eps_tgt - eps_src), where reg is
    eta * delta (l2_signed), eta * sign(delta) (l1_sign), or
    eta * |delta| (literal_abs).  eta = 0 reproduces dds_grad bitwise; the
    regularizer term is skipped outright, not added as zeros.
    """
    wt = cfg.weight_at(t)
    noise = _weighted_delta(eps_tgt, eps_src, wt)
    if cfg.eta == 0.0:
        return GradResult(grad=noise, noise_delta_norm=float(np.linalg.norm(noise)))
    as_latent(x0_tgt)
    reg = _regularizer(x0_tgt, x0_src, cfg.eta, cfg.regularizer_mode)
    if reg.shape != noise.shape:
        raise ValueError(
            f"latent shape {reg.shape} does not match prediction shape {noise.shape}")
    total = (reg.astype(np.float64) + noise.astype(np.float64)).astype(LATENT_DTYPE)
    return GradResult(grad=total,
                      noise_delta_norm=float(np.linalg.norm(noise)),
                      regularizer_norm=float(np.linalg.norm(reg)))


def apply_update(latent: np.ndarray, grad: np.ndarray, lr: float,
                 step: int | None = None) -> np.ndarray:
    """One descent step: latent - lr * grad; aborts on non-finite values."""
    x = as_latent(latent)
    g = as_latent(grad)
    if x.shape != g.shape:
        raise ValueError(f"latent shape {x.shape} != grad shape {g.shape}")
    if not (math.isfinite(lr) and lr > 0.0):
        raise ValueError(f"learning rate must be positive, got {lr}")
    with np.errstate(over="ignore"):
        out = (x.astype(np.float64) - lr * g.astype(np.float64)).astype(LATENT_DTYPE)
    if not np.all(np.isfinite(out)):
        where = "" if step is None else f" at step {step}"
        raise NumericalAbort(f"update produced non-finite values{where}")
    return out
