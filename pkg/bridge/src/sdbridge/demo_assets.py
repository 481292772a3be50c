"""Deterministic demo assets: two region-localized adapters, test images.

Adapters are written as .npz weight files so they exercise the same
loading path a real checkpoint directory would; regenerating them always
produces identical bytes.
"""

import hashlib
import io
from pathlib import Path

import numpy as np
from PIL import Image

from .backbone import LATENT_SHAPE
from .vae import IMAGE_SIZE

# demo adapters own disjoint horizontal bands of the latent plane
DEMO_ADAPTER_REGIONS = {
    "sunglasses": (8, 24),
    "leather_jacket": (36, 60),
}


def demo_adapter_delta(adapter_id: str) -> np.ndarray:
    rows = DEMO_ADAPTER_REGIONS[adapter_id]
    digest = hashlib.sha256(adapter_id.encode("utf-8")).digest()
    rng = np.random.default_rng(np.random.Philox(int.from_bytes(digest[:8], "little")))
    delta = np.zeros(LATENT_SHAPE, dtype=np.float32)
    band = rng.standard_normal(
        (LATENT_SHAPE[0], rows[1] - rows[0], LATENT_SHAPE[2]),
        dtype=np.float32)
    delta[:, rows[0]:rows[1], :] = 1.0 + 0.25 * band
    return delta


def ensure_demo_adapters(directory) -> dict:
    """Write the demo adapter files if missing; returns {id: path}."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for adapter_id in DEMO_ADAPTER_REGIONS:
        path = directory / f"{adapter_id}.npz"
        if not path.exists():
            np.savez(path, delta=demo_adapter_delta(adapter_id),
                     default_scale=np.float64(0.8))
        paths[adapter_id] = path
    return paths


def make_test_image(kind: str) -> bytes:
    """A smooth 512x512 RGB PNG: solid gray, gradient, or radial blob."""
    n = IMAGE_SIZE
    if kind == "gray":
        arr = np.full((n, n, 3), 128, dtype=np.uint8)
    elif kind == "gradient":
        ramp = np.linspace(0, 255, n)
        arr = np.stack([
            np.tile(ramp, (n, 1)),
            np.tile(ramp[::-1], (n, 1)),
            np.tile(ramp, (n, 1)).T,
        ], axis=-1).astype(np.uint8)
    elif kind == "blob":
        ys, xs = np.mgrid[0:n, 0:n]
        r2 = ((ys - n / 2) ** 2 + (xs - n / 2) ** 2) / (n / 3) ** 2
        blob = 127.5 + 100.0 * np.exp(-r2)
        arr = np.stack([blob, 255.0 - blob * 0.5, blob * 0.8],
                       axis=-1).clip(0, 255).astype(np.uint8)
    else:
        raise ValueError(f"unknown test image kind {kind!r}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
