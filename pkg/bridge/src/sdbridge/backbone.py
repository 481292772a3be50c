"""A tiny deterministic stand-in for a latent-diffusion UNet.

Real checkpoints need gigabytes and a GPU; this backbone keeps the same
call signature and determinism guarantees at desk scale.  Conditions are
text hashed into embedding space and projected to a latent-shaped drive
field; adapters contribute weight deltas scaled per request; the noise
level follows the usual square-root beta ramp.
"""

import hashlib
import math

import numpy as np

LATENT_SHAPE = (4, 64, 64)
EMBED_DIM = 64

T_STEPS = 1000
BETA_START = 0.00085
BETA_END = 0.012

# coupling strengths; small enough that prediction magnitudes stay O(1)
Z_GAIN = 0.3
MIX_GAIN = 0.05


def alpha_bar_table() -> np.ndarray:
    ramp = np.linspace(math.sqrt(BETA_START), math.sqrt(BETA_END), T_STEPS,
                       dtype=np.float64)
    return np.cumprod(1.0 - ramp * ramp)


def text_embedding(text: str) -> np.ndarray:
    """Hash the text into a fixed pseudo-embedding; same text, same vector."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(np.random.Philox(seed))
    return rng.standard_normal(EMBED_DIM, dtype=np.float32)


class TinyUNet:
    """Deterministic noise predictor over (4, 64, 64) latents."""

    def __init__(self, seed: int = 0):
        rng = np.random.default_rng(np.random.Philox(seed))
        n = int(np.prod(LATENT_SHAPE))
        self._proj = rng.standard_normal((n, EMBED_DIM), dtype=np.float32)
        self._proj /= np.float32(math.sqrt(EMBED_DIM))
        self._alpha_bar = alpha_bar_table()

    @property
    def t_steps(self) -> int:
        return T_STEPS

    def drive_field(self, embedding: np.ndarray) -> np.ndarray:
        """Project an embedding into latent space, done once per condition."""
        field = self._proj @ embedding.astype(np.float32)
        return field.reshape(LATENT_SHAPE)

    def predict(self, z: np.ndarray, t: int, drive: np.ndarray,
                adapter_terms) -> np.ndarray:
        """eps for one latent; adapter_terms is a list of (scale, delta)."""
        sigma = np.float32(math.sqrt(1.0 - self._alpha_bar[t - 1]))
        eps = Z_GAIN * z.astype(np.float32)
        eps = eps + sigma * drive
        eps = eps + np.float32(MIX_GAIN) * np.tanh(np.roll(z, 1, axis=1))
        for scale, delta in adapter_terms:
            eps = eps + np.float32(scale) * sigma * delta
        return eps.astype(np.float32)
