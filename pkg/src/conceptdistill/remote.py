"""HTTP client for a remote noise-predictor service.

Speaks JSON over HTTP with binary tensors as base64-encoded CDST blobs.
The service owns conditions and adapters; the client validates nothing it
cannot know and surfaces server decisions as typed errors.
"""

from __future__ import annotations

import base64
from typing import Sequence

import numpy as np
import requests

from .core import AdapterSpec, ShapeMismatchError, tensor_read, tensor_write
from .predictor import (
    BackendError,
    PredictorBackend,
    UnknownAdapterError,
    UnknownConditionError,
)

PROTOCOL_VERSION = 1


class TransportError(BackendError):
    """Connection failure, or a timeout that survived one retry."""


class NotReadyError(BackendError):
    """Service reachable but still loading its model."""


class ProtocolVersionError(BackendError):
    pass


class ServerError(BackendError):
    """Server-side model failure, message propagated from the service."""


class DuplicateConditionError(BackendError):
    pass


def _detail(resp) -> str:
    try:
        body = resp.json()
    except ValueError:
        return resp.text.strip() or f"HTTP {resp.status_code}"
    if isinstance(body, dict):
        for key in ("detail", "error", "message"):
            if key in body:
                return str(body[key])
    return str(body)


def encode_tensor(x: np.ndarray) -> str:
    return base64.b64encode(tensor_write(x)).decode("ascii")


def decode_tensor(data: str) -> np.ndarray:
    return tensor_read(base64.b64decode(data.encode("ascii")))


class RemoteBackend(PredictorBackend):
    """Predictor backed by the bridge service at `url`.

    The first call performs the health handshake, which pins the protocol
    version and the served latent shape.  Condition and adapter sets stay
    with the server, so the capability properties report None and bad names
    come back as typed errors from the service.
    """

    def __init__(self, url: str, timeout: float = 60.0, session=None):
        self.url = url.rstrip("/")
        self.timeout = float(timeout)
        self._session = session if session is not None else requests.Session()
        self._shape: tuple[int, int, int] | None = None
        self.model_spec = None

    # -- plumbing ----------------------------------------------------------

    def _request(self, method: str, path: str, body=None, _retry=True):
        try:
            resp = self._session.request(method, self.url + path, json=body,
                                         timeout=self.timeout)
        except requests.Timeout:
            if _retry:
                return self._request(method, path, body, _retry=False)
            raise TransportError(f"{path} timed out after retry") from None
        except requests.RequestException as exc:
            raise TransportError(f"{path}: {exc}") from None
        return resp

    # -- handshake ---------------------------------------------------------

    def connect(self) -> dict:
        """GET /health; pins protocol version and latent shape."""
        resp = self._request("GET", "/health")
        if resp.status_code == 503:
            raise NotReadyError(_detail(resp))
        if resp.status_code != 200:
            raise TransportError(f"/health returned HTTP {resp.status_code}: {_detail(resp)}")
        body = resp.json()
        version = body.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise ProtocolVersionError(
                f"server protocol version {version!r}, client needs {PROTOCOL_VERSION}")
        shape = tuple(int(d) for d in body["latent_shape"])
        if len(shape) != 3 or min(shape) < 1:
            raise ProtocolVersionError(f"/health reported bad latent_shape {shape}")
        self._shape = shape
        self.model_spec = body.get("model_spec")
        return body

    @property
    def shape(self):
        if self._shape is None:
            self.connect()
        return self._shape

    @property
    def conditions(self):
        return None

    @property
    def adapters(self):
        return None

    # -- operations --------------------------------------------------------

    def register_condition(self, name: str, text: str, negative: bool = False) -> None:
        resp = self._request("POST", "/register_condition",
                             {"name": name, "text": text, "negative": bool(negative)})
        if resp.status_code == 409:
            raise DuplicateConditionError(_detail(resp))
        if resp.status_code != 200:
            raise ServerError(f"/register_condition: {_detail(resp)}")

    def predict(self, z_t: np.ndarray, t: int, cond: str,
                adapters: Sequence[AdapterSpec] = ()) -> np.ndarray:
        body = {
            "condition": cond,
            "timestep": int(t),
            "adapters": [{"id": s.id, "scale": s.scale} for s in adapters],
            "latent": encode_tensor(z_t),
        }
        resp = self._request("POST", "/predict", body)
        if resp.status_code == 404:
            detail = _detail(resp)
            if "adapter" in detail.lower():
                raise UnknownAdapterError(detail)
            raise UnknownConditionError(detail)
        if resp.status_code == 422:
            raise ShapeMismatchError(_detail(resp))
        if resp.status_code != 200:
            raise ServerError(f"/predict: {_detail(resp)}")
        eps = decode_tensor(resp.json()["eps"])
        if eps.shape != self.shape:
            raise ShapeMismatchError(
                f"server returned shape {eps.shape}, declared {self.shape}")
        return eps

    def encode_image(self, png_bytes: bytes) -> np.ndarray:
        resp = self._request("POST", "/encode",
                             {"image": base64.b64encode(png_bytes).decode("ascii")})
        if resp.status_code == 422:
            raise ShapeMismatchError(_detail(resp))
        if resp.status_code != 200:
            raise ServerError(f"/encode: {_detail(resp)}")
        return decode_tensor(resp.json()["latent"])

    def decode_latent(self, latent: np.ndarray) -> bytes:
        resp = self._request("POST", "/decode", {"latent": encode_tensor(latent)})
        if resp.status_code == 422:
            raise ShapeMismatchError(_detail(resp))
        if resp.status_code != 200:
            raise ServerError(f"/decode: {_detail(resp)}")
        return base64.b64decode(resp.json()["image"].encode("ascii"))
