"""Service wrapping a latent-diffusion backbone behind a small wire protocol.

Endpoints: /health, /register_condition, /predict, /encode, /decode.
Conditions are registered as text and cached as embeddings; adapters are
weight deltas loaded from disk and scaled per request; images round-trip
through a deterministic pixel/latent codec.
"""

from .codec import tensor_from_b64, tensor_from_bytes, tensor_to_b64, tensor_to_bytes
from .session import BridgeError, BridgeSession, LATENT_SHAPE

__version__ = "0.1.0"

__all__ = [
    "BridgeError",
    "BridgeSession",
    "LATENT_SHAPE",
    "tensor_from_b64",
    "tensor_from_bytes",
    "tensor_to_b64",
    "tensor_to_bytes",
]
