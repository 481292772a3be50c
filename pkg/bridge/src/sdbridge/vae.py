"""Pixel/latent codec: 512x512 RGB images to (4, 64, 64) latents and back.

Encoding block-averages each 8x8 pixel tile and mixes the three color
channels into four latent channels with a fixed orthonormal map; decoding
inverts the mixing and upsamples bilinearly.  Smooth content survives the
round trip well; that is all a latent-space editor needs from it.
"""

import io

import numpy as np
from PIL import Image, UnidentifiedImageError

IMAGE_SIZE = 512
BLOCK = 8
GRID = IMAGE_SIZE // BLOCK  # 64


class ImageFormatError(ValueError):
    pass


def _channel_mix() -> np.ndarray:
    """Fixed (4, 3) map with orthonormal columns, so decode inverts encode."""
    rng = np.random.default_rng(np.random.Philox(2024))
    m = rng.standard_normal((4, 3))
    q, _ = np.linalg.qr(m)
    return np.ascontiguousarray(q, dtype=np.float32)


def _bilinear_matrix() -> np.ndarray:
    """(512, 64) interpolation weights from block centers to pixel centers."""
    centers = np.arange(GRID, dtype=np.float64) * BLOCK + (BLOCK - 1) / 2.0
    xs = np.arange(IMAGE_SIZE, dtype=np.float64)
    weights = np.zeros((IMAGE_SIZE, GRID))
    for j in range(GRID):
        basis = np.zeros(GRID)
        basis[j] = 1.0
        weights[:, j] = np.interp(xs, centers, basis)
    return weights.astype(np.float32)


_MIX = _channel_mix()
_UP = _bilinear_matrix()


def encode_png(png_bytes: bytes) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(png_bytes))
        img.load()
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageFormatError(f"not a decodable image: {exc}") from exc
    if img.size != (IMAGE_SIZE, IMAGE_SIZE):
        raise ImageFormatError(
            f"image is {img.size[0]}x{img.size[1]}, need "
            f"{IMAGE_SIZE}x{IMAGE_SIZE}")
    arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 127.5 - 1.0
    blocks = arr.reshape(GRID, BLOCK, GRID, BLOCK, 3).mean(axis=(1, 3))
    latent = np.einsum("hwc,kc->khw", blocks, _MIX)
    return np.ascontiguousarray(latent, dtype=np.float32)


def decode_latent(latent: np.ndarray) -> bytes:
    latent = np.asarray(latent, dtype=np.float32)
    if latent.shape != (4, GRID, GRID):
        raise ImageFormatError(
            f"latent shape {latent.shape} does not match (4, {GRID}, {GRID})")
    blocks = np.einsum("khw,kc->hwc", latent, _MIX)
    # upsample rows then columns: (512, 64) @ (64, 64) @ (64, 512)
    full = np.einsum("ph,hwc,qw->pqc", _UP, blocks, _UP)
    pixels = np.clip((full + 1.0) * 127.5, 0.0, 255.0)
    img = Image.fromarray(np.round(pixels).astype(np.uint8), mode="RGB")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
