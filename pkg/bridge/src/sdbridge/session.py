"""One serving session: a loaded backbone, its conditions, its adapters.

All mutating and predicting calls are serialized behind one lock; the
backbone itself is pure, so identical requests return identical bytes.
"""

from __future__ import annotations

import threading
from pathlib import Path

import numpy as np

from .backbone import LATENT_SHAPE, TinyUNet, text_embedding
from .vae import ImageFormatError, decode_latent, encode_png

DEFAULT_ADAPTER_SCALE = 0.8


class BridgeError(Exception):
    """Service-level failure carrying the HTTP status it maps to."""

    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


class BridgeSession:
    def __init__(self, model_spec: str = "tiny-unet-v1", seed: int = 0,
                 adapter_dir=None):
        self.model_spec = model_spec
        self.seed = seed
        self._unet = TinyUNet(seed)
        self._conditions: dict = {}
        self._adapters: dict = {}
        self._lock = threading.Lock()
        if adapter_dir is not None:
            self.load_adapter_dir(adapter_dir)

    @property
    def latent_shape(self):
        return LATENT_SHAPE

    @property
    def condition_names(self):
        return sorted(self._conditions)

    @property
    def adapter_ids(self):
        return sorted(self._adapters)

    def load_adapter_dir(self, adapter_dir) -> None:
        """Load every .npz in the directory; the file stem is the adapter id."""
        for path in sorted(Path(adapter_dir).glob("*.npz")):
            self.load_adapter(path.stem, path)

    def load_adapter(self, adapter_id: str, path) -> None:
        with np.load(path) as data:
            delta = np.asarray(data["delta"], dtype=np.float32)
            scale = float(data["default_scale"]) if "default_scale" in data \
                else DEFAULT_ADAPTER_SCALE
        if delta.shape != LATENT_SHAPE:
            raise BridgeError(500, f"adapter {adapter_id!r} has shape "
                                   f"{delta.shape}, need {LATENT_SHAPE}")
        self._adapters[adapter_id] = {"path": str(path), "delta": delta,
                                      "default_scale": scale}

    def register_condition(self, name: str, text: str,
                           negative: bool = False) -> None:
        if not text:
            raise BridgeError(400, "condition text is empty")
        if not name:
            raise BridgeError(400, "condition name is empty")
        with self._lock:
            if name in self._conditions:
                raise BridgeError(409, f"condition {name!r} already registered")
            embedding = text_embedding(text)
            self._conditions[name] = {
                "text": text,
                "negative": bool(negative),
                "embedding": embedding,
                "drive": self._unet.drive_field(embedding),
            }

    def predict(self, condition: str, timestep: int,
                adapters, latent: np.ndarray) -> np.ndarray:
        with self._lock:
            cond = self._conditions.get(condition)
            if cond is None:
                raise BridgeError(404, f"condition {condition!r} not registered")
            if not 1 <= int(timestep) <= self._unet.t_steps:
                raise BridgeError(
                    422, f"timestep {timestep} outside [1, {self._unet.t_steps}]")
            if latent.shape != LATENT_SHAPE:
                raise BridgeError(422, f"latent shape {latent.shape} does not "
                                       f"match {LATENT_SHAPE}")
            terms = []
            for ref in adapters:
                entry = self._adapters.get(ref["id"])
                if entry is None:
                    raise BridgeError(404, f"adapter {ref['id']!r} not loaded")
                scale = ref.get("scale")
                if scale is None:
                    scale = entry["default_scale"]
                terms.append((float(scale), entry["delta"]))
            return self._unet.predict(latent, int(timestep), cond["drive"],
                                      terms)

    def encode(self, png_bytes: bytes) -> np.ndarray:
        with self._lock:
            try:
                return encode_png(png_bytes)
            except ImageFormatError as exc:
                raise BridgeError(422, str(exc)) from exc

    def decode(self, latent: np.ndarray) -> bytes:
        with self._lock:
            try:
                return decode_latent(latent)
            except ImageFormatError as exc:
                raise BridgeError(422, str(exc)) from exc
