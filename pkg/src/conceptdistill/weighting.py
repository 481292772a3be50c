"""Dynamic per-patch blending of concept-adapter predictions.

Each adapter prediction is compared to the base prediction patch by patch
(cosine similarity); a temperature-scaled SoftMin turns similarities into
weights, which are upsampled nearest-neighbour and used for a Hadamard
blend.  Low similarity means the adapter is injecting something, so it
wins weight; near-identical patches contribute little and are damped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LATENT_DTYPE, AdapterSpec, ShapeMismatchError, as_latent
from .predictor import PredictorBackend, predict

ZERO_NORM_EPS = 1e-8
DEFAULT_PATCH = (2, 2)
DEFAULT_TAU = 0.002


@dataclass(frozen=True)
class PatchGrid:
    """Non-overlapping patch decomposition of one latent tensor.

    `vectors[p]` holds patch p flattened in (channel, row, col) order;
    patches are numbered row-major over the (H/h_p, W/w_p) grid.
    """

    patch: tuple[int, int]
    grid: tuple[int, int]
    channels: int
    vectors: np.ndarray  # (P, C * h_p * w_p) float64

    @property
    def count(self) -> int:
        return int(self.vectors.shape[0])

    def geometry(self):
        return (self.patch, self.grid, self.channels)


@dataclass(frozen=True)
class WeightMap:
    """Per-adapter spatial weight fields, normalized across adapters.

    fields[i, h, w] is adapter i's weight at that location; the fields sum
    to one at every location and are piecewise constant on the patch grid.
    """

    fields: np.ndarray  # (N, H, W) float64
    patch: tuple[int, int]

    def __post_init__(self):
        f = np.asarray(self.fields, dtype=np.float64)
        if f.ndim != 3 or f.shape[0] < 1:
            raise ShapeMismatchError(f"weight fields must be (N, H, W), got {f.shape}")
        if np.any(f < -1e-9) or np.any(f > 1.0 + 1e-9):
            raise ValueError("weights must lie in [0, 1]")
        sums = f.sum(axis=0)
        if np.max(np.abs(sums - 1.0)) > 1e-6:
            raise ValueError("weights must sum to 1 across adapters at every location")
        object.__setattr__(self, "fields", f)


def partition_patches(eps: np.ndarray, patch: tuple[int, int]) -> PatchGrid:
    """Split a latent into non-overlapping patches and flatten each.

    Spatial dims must divide evenly; there is no padding.
    """
    x = as_latent(eps)
    hp, wp = int(patch[0]), int(patch[1])
    if hp < 1 or wp < 1:
        raise ValueError(f"patch size must be positive, got ({hp}, {wp})")
    c, h, w = x.shape
    if h % hp or w % wp:
        raise ValueError(
            f"spatial dims ({h}, {w}) not divisible by patch ({hp}, {wp})")
    gh, gw = h // hp, w // wp
    blocks = x.astype(np.float64).reshape(c, gh, hp, gw, wp)
    vectors = blocks.transpose(1, 3, 0, 2, 4).reshape(gh * gw, c * hp * wp)
    return PatchGrid(patch=(hp, wp), grid=(gh, gw), channels=c,
                     vectors=np.ascontiguousarray(vectors))


def patch_cosine(base: PatchGrid, other: PatchGrid) -> np.ndarray:
    """Per-patch cosine similarity, in [-1, 1].

    Patches where both vectors are numerically zero count as identical
    (similarity 1); a zero vector against a nonzero one counts as 0.
    """
    if base.geometry() != other.geometry():
        raise ShapeMismatchError(
            f"patch grids differ: {base.geometry()} vs {other.geometry()}")
    a, b = base.vectors, other.vectors
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    a_zero = na < ZERO_NORM_EPS
    b_zero = nb < ZERO_NORM_EPS
    denom = np.where(a_zero | b_zero, 1.0, na * nb)
    sims = np.einsum("pk,pk->p", a, b) / denom
    sims = np.where(a_zero & b_zero, 1.0, sims)
    sims = np.where(a_zero ^ b_zero, 0.0, sims)
    return np.clip(sims, -1.0, 1.0)


def similarity_matrix(base: PatchGrid, others: Sequence[PatchGrid]) -> np.ndarray:
    """Stack per-adapter similarity rows into the (N, P) matrix."""
    if len(others) < 1:
        raise ValueError("need at least one adapter grid")
    return np.stack([patch_cosine(base, g) for g in others])


def softmin_weights(S: np.ndarray, tau: float) -> np.ndarray:
    """Temperature-scaled SoftMin across adapters, column by column.

    Computed in log-space with per-patch max subtraction; small tau (the
    0.002 default) produces exponents of magnitude ~500 otherwise.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    s = np.asarray(S, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 1:
        raise ShapeMismatchError(f"similarity matrix must be (N, P), got {s.shape}")
    logits = -s / tau
    logits -= logits.max(axis=0, keepdims=True)
    w = np.exp(logits)
    return w / w.sum(axis=0, keepdims=True)


def upsample_weights(omega: np.ndarray, patch: tuple[int, int],
                     height: int, width: int) -> WeightMap:
    """Nearest-neighbour upsample of per-patch weights to (N, H, W)."""
    w = np.asarray(omega, dtype=np.float64)
    if w.ndim != 2:
        raise ShapeMismatchError(f"omega must be (N, P), got {w.shape}")
    hp, wp = int(patch[0]), int(patch[1])
    if height % hp or width % wp:
        raise ValueError(
            f"spatial dims ({height}, {width}) not divisible by patch ({hp}, {wp})")
    gh, gw = height // hp, width // wp
    if w.shape[1] != gh * gw:
        raise ShapeMismatchError(
            f"omega has {w.shape[1]} patches, geometry implies {gh * gw}")
    fields = w.reshape(-1, gh, gw).repeat(hp, axis=1).repeat(wp, axis=2)
    return WeightMap(fields=fields, patch=(hp, wp))


def composite_prediction(preds: Sequence[np.ndarray], wmap: WeightMap) -> np.ndarray:
    """Weighted Hadamard blend: sum_i W_i * preds_i, W broadcast over channels."""
    n = wmap.fields.shape[0]
    if len(preds) != n:
        raise ShapeMismatchError(f"{len(preds)} predictions for {n} weight fields")
    shape = None
    acc = None
    for i, p in enumerate(preds):
        x = as_latent(p)
        if shape is None:
            shape = x.shape
            if shape[1:] != wmap.fields.shape[1:]:
                raise ShapeMismatchError(
                    f"prediction spatial dims {shape[1:]} vs weights {wmap.fields.shape[1:]}")
            acc = np.zeros(shape, dtype=np.float64)
        elif x.shape != shape:
            raise ShapeMismatchError(f"prediction {i} shape {x.shape}, expected {shape}")
        acc += wmap.fields[i][None, :, :] * x.astype(np.float64)
    return acc.astype(LATENT_DTYPE)


def weight_entropy(omega: np.ndarray) -> float:
    """Mean entropy (nats) of the adapter distribution, averaged over locations.

    Accepts the (N, P) weight matrix or a WeightMap's (N, H, W) fields;
    axis 0 indexes adapters either way.
    """
    w = np.asarray(omega, dtype=np.float64)
    if w.ndim < 2:
        raise ShapeMismatchError(f"weights must have an adapter axis, got shape {w.shape}")
    flat = w.reshape(w.shape[0], -1)
    safe = np.where(flat > 0.0, flat, 1.0)  # 0 log 0 := 0
    return float(-(flat * np.log(safe)).sum(axis=0).mean())


def weighted_composite(base_eps: np.ndarray, adapter_preds: Sequence[np.ndarray],
                       patch: tuple[int, int], tau: float):
    """Full pipeline from predictions to the blended tensor.

    Returns (composite, weight map).  The base prediction enters only the
    similarity comparison, never the blend.
    """
    if len(adapter_preds) < 1:
        raise ValueError("need at least one adapter prediction")
    base_grid = partition_patches(base_eps, patch)
    grids = [partition_patches(p, patch) for p in adapter_preds]
    omega = softmin_weights(similarity_matrix(base_grid, grids), tau)
    _, h, w = as_latent(base_eps).shape
    wmap = upsample_weights(omega, patch, h, w)
    return composite_prediction(adapter_preds, wmap), wmap


def dynamic_weighted_predict(backend: PredictorBackend,
                             adapters: Sequence[AdapterSpec],
                             z_t: np.ndarray, t: int, cond: str,
                             patch: tuple[int, int] = DEFAULT_PATCH,
                             tau: float = DEFAULT_TAU,
                             executor=None,
                             return_weights: bool = False):
    """Blend the N single-adapter predictions by dynamic patch weighting.

    Issues one base call plus one call per adapter; an executor (if given)
    runs the independent calls concurrently, results gathered in adapter
    order so the composite is deterministic either way.
    """
    if len(adapters) < 1:
        raise ValueError("need at least one adapter")

    def one(spec):
        return predict(backend, z_t, t, cond, (spec,))

    if executor is None:
        base = predict(backend, z_t, t, cond, ())
        preds = [one(spec) for spec in adapters]
    else:
        base_f = executor.submit(predict, backend, z_t, t, cond, ())
        pred_fs = [executor.submit(one, spec) for spec in adapters]
        base = base_f.result()
        preds = [f.result() for f in pred_fs]
    composite, wmap = weighted_composite(base, preds, patch, tau)
    if return_weights:
        return composite, wmap
    return composite
