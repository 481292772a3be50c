"""Noise-predictor backends and the negative-prompt guidance combinator.

A backend maps (z_t, t, condition, adapters) to a noise prediction of a
fixed declared shape.  Two in-process backends live here: a closed-form
Gaussian concept model used for verification, and a constant stub.  The
HTTP client for a remote denoiser is in `remote`.
"""

from __future__ import annotations

import abc
import math
from typing import Mapping, Sequence

import numpy as np

from .core import LATENT_DTYPE, AdapterSpec, ShapeMismatchError, as_latent
from .schedule import NoiseSchedule


class BackendError(Exception):
    """Base for predictor-backend failures."""


class UnknownConditionError(BackendError):
    pass


class UnknownAdapterError(BackendError):
    pass


class PredictorBackend(abc.ABC):
    """Deterministic noise predictor serving one latent shape."""

    @property
    @abc.abstractmethod
    def shape(self) -> tuple[int, int, int]:
        """Latent shape (C, H, W) this backend serves."""

    @property
    @abc.abstractmethod
    def conditions(self) -> frozenset | None:
        """Registered condition names, or None when only the backend knows."""

    @property
    @abc.abstractmethod
    def adapters(self) -> frozenset | None:
        """Available adapter ids, or None when only the backend knows."""

    @abc.abstractmethod
    def predict(self, z_t: np.ndarray, t: int, cond: str,
                adapters: Sequence[AdapterSpec] = ()) -> np.ndarray:
        """Noise prediction; empty adapter list means the base model."""


def predict(backend: PredictorBackend, z_t: np.ndarray, t: int, cond: str,
            adapters: Sequence[AdapterSpec] = ()) -> np.ndarray:
    """Validated prediction call.

    Checks the request against the backend's declared capabilities and the
    response against its declared shape, so misbehaving backends fail loudly.
    """
    z = as_latent(z_t)
    if z.shape != tuple(backend.shape):
        raise ShapeMismatchError(
            f"latent shape {z.shape} does not match backend shape {tuple(backend.shape)}")
    known_c = backend.conditions
    if known_c is not None and cond not in known_c:
        raise UnknownConditionError(f"condition {cond!r} not registered")
    known_a = backend.adapters
    if known_a is not None:
        for spec in adapters:
            if spec.id not in known_a:
                raise UnknownAdapterError(f"adapter {spec.id!r} not available")
    out = as_latent(backend.predict(z, int(t), cond, tuple(adapters)))
    if out.shape != tuple(backend.shape):
        raise ShapeMismatchError(
            f"backend returned shape {out.shape}, declared {tuple(backend.shape)}")
    return out


def guided_predict(backend: PredictorBackend, z_t: np.ndarray, t: int,
                   cond_pos: str, cond_neg: str, lam: float,
                   adapters: Sequence[AdapterSpec] = (),
                   neg_adapters: Sequence[AdapterSpec] = (),
                   pos_prediction: np.ndarray | None = None) -> np.ndarray:
    """Negative-prompt guidance: (1 + lam) * eps(pos) - lam * eps(neg).

    The negative branch runs without adapters unless `neg_adapters` is given.
    `pos_prediction` substitutes a precomputed positive branch (the editor
    passes a dynamically weighted composite there).  Arithmetic runs in
    float64 so identical branches cancel to the positive prediction exactly.
    """
    if not math.isfinite(lam):
        raise ValueError(f"guidance scale must be finite, got {lam}")
    known_c = backend.conditions
    if known_c is not None and cond_neg not in known_c:
        raise UnknownConditionError(f"condition {cond_neg!r} not registered")
    if pos_prediction is None:
        pos = predict(backend, z_t, t, cond_pos, adapters)
    else:
        pos = as_latent(pos_prediction)
        if pos.shape != tuple(backend.shape):
            raise ShapeMismatchError(
                f"positive prediction shape {pos.shape}, backend {tuple(backend.shape)}")
    if lam == 0.0:
        return pos
    neg = predict(backend, z_t, t, cond_neg, neg_adapters)
    out = (1.0 + lam) * pos.astype(np.float64) - lam * neg.astype(np.float64)
    return out.astype(LATENT_DTYPE)


def _as_field(value, shape: tuple[int, int, int]) -> np.ndarray:
    """Scalar or array -> float64 array of the given latent shape."""
    if np.isscalar(value):
        return np.full(shape, float(value), dtype=np.float64)
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise ShapeMismatchError(f"field shape {arr.shape} does not match {shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("field contains non-finite values")
    return arr


class GaussianConceptModel(PredictorBackend):
    """Closed-form denoiser for x0 ~ N(mu, sigma2 * I).

    The marginal of z_t is Gaussian, so the exact noise prediction is

        eps(z_t) = sqrt(1 - a) * (z_t - sqrt(a) * mu) / (a * sigma2 + 1 - a)

    with a the cumulative signal fraction at t.  Conditions shift the mean;
    each adapter adds scale * delta_i, where delta_i is supported only on
    its boolean region mask, so adapter effects are spatially exact.
    """

    def __init__(self, mu_base, sigma2: float, schedule: NoiseSchedule,
                 conditions: Mapping[str, object],
                 adapters: Mapping[str, tuple[object, object]] | None = None):
        base = np.asarray(mu_base, dtype=np.float64)
        if base.ndim != 3:
            raise ShapeMismatchError(f"mu_base must be rank 3, got shape {base.shape}")
        if not (math.isfinite(sigma2) and sigma2 > 0.0):
            raise ValueError(f"sigma2 must be positive, got {sigma2}")
        shape = tuple(int(d) for d in base.shape)
        self._shape = shape
        self._mu_base = base
        self.sigma2 = float(sigma2)
        self.noise_schedule = schedule
        self._cond_offsets = {str(k): _as_field(v, shape) for k, v in conditions.items()}
        deltas, masks = {}, {}
        for aid, (delta, mask) in (adapters or {}).items():
            m = np.asarray(mask, dtype=bool)
            if m.shape != shape[1:]:
                raise ShapeMismatchError(
                    f"mask for adapter {aid!r} has shape {m.shape}, want {shape[1:]}")
            d = _as_field(delta, shape)
            deltas[str(aid)] = np.where(m[None, :, :], d, 0.0)
            masks[str(aid)] = m
        self._deltas = deltas
        self._masks = masks

    @property
    def shape(self):
        return self._shape

    @property
    def conditions(self):
        return frozenset(self._cond_offsets)

    @property
    def adapters(self):
        return frozenset(self._deltas)

    def adapter_mask(self, adapter_id: str) -> np.ndarray:
        return self._masks[adapter_id].copy()

    def concept_mean(self, cond: str, adapters: Sequence[AdapterSpec] = ()) -> np.ndarray:
        """Mean of x0 under the condition with the given adapters active."""
        if cond not in self._cond_offsets:
            raise UnknownConditionError(f"condition {cond!r} not registered")
        mu = self._mu_base + self._cond_offsets[cond]
        for spec in adapters:
            if spec.id not in self._deltas:
                raise UnknownAdapterError(f"adapter {spec.id!r} not available")
            mu = mu + spec.scale * self._deltas[spec.id]
        return mu

    def predict(self, z_t, t, cond, adapters=()):
        a = self.noise_schedule.alpha_bar_at(int(t))
        mu = self.concept_mean(cond, adapters)
        z = np.asarray(z_t, dtype=np.float64)
        if z.shape != self._shape:
            raise ShapeMismatchError(
                f"latent shape {z.shape} does not match backend shape {self._shape}")
        eps = math.sqrt(1.0 - a) * (z - math.sqrt(a) * mu) / (a * self.sigma2 + (1.0 - a))
        return eps.astype(LATENT_DTYPE)


class ConstantBackend(PredictorBackend):
    """Stub returning fixed fields per condition plus scaled per-adapter fields.

    Ignores the latent and the timestep; useful for exercising combinators.
    """

    def __init__(self, shape: tuple[int, int, int],
                 values: Mapping[str, object],
                 adapter_values: Mapping[str, object] | None = None):
        self._shape = tuple(int(d) for d in shape)
        self._values = {str(k): _as_field(v, self._shape) for k, v in values.items()}
        self._adapter_values = {str(k): _as_field(v, self._shape)
                                for k, v in (adapter_values or {}).items()}

    @property
    def shape(self):
        return self._shape

    @property
    def conditions(self):
        return frozenset(self._values)

    @property
    def adapters(self):
        return frozenset(self._adapter_values)

    def predict(self, z_t, t, cond, adapters=()):
        if cond not in self._values:
            raise UnknownConditionError(f"condition {cond!r} not registered")
        out = self._values[cond].copy()
        for spec in adapters:
            if spec.id not in self._adapter_values:
                raise UnknownAdapterError(f"adapter {spec.id!r} not available")
            out += spec.scale * self._adapter_values[spec.id]
        return out.astype(LATENT_DTYPE)
