"""Remote-backend client tests against a tiny in-process HTTP stub.

The stub speaks just enough of the wire protocol to exercise handshake,
tensor round-trips, typed error mapping, and the retry-once-on-timeout
rule; no real service is involved.
"""

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from conceptdistill.core import ShapeMismatchError
from conceptdistill.predictor import UnknownAdapterError, UnknownConditionError
from conceptdistill.remote import (
    DuplicateConditionError,
    NotReadyError,
    ProtocolVersionError,
    RemoteBackend,
    ServerError,
    TransportError,
    decode_tensor,
    encode_tensor,
)

SHAPE = (1, 2, 2)


class _StubHandler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _send(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            status, payload = self.server.health
            self._send(status, payload)
        else:
            self._send(404, {"detail": "no such route"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(length)) if length else {}
        self.server.requests.append((self.path, body))
        delay = self.server.delays.get(self.path)
        if delay:
            remaining = self.server.delay_counts.get(self.path, -1)
            if remaining != 0:
                if remaining > 0:
                    self.server.delay_counts[self.path] = remaining - 1
                time.sleep(delay)
        handler = self.server.routes.get(self.path)
        if handler is None:
            self._send(404, {"detail": "no such route"})
        else:
            status, payload = handler(body)
            self._send(status, payload)


class _Stub:
    def __init__(self):
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
        self.server.health = (200, {"protocol_version": 1,
                                    "latent_shape": list(SHAPE),
                                    "model_spec": "stub-checkpoint"})
        self.server.routes = {}
        self.server.delays = {}
        self.server.delay_counts = {}
        self.server.requests = []
        self.thread = threading.Thread(
            target=lambda: self.server.serve_forever(poll_interval=0.02), daemon=True)
        self.thread.start()
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub():
    s = _Stub()
    yield s
    s.close()


def _doubling_predict(body):
    latent = decode_tensor(body["latent"])
    return 200, {"eps": encode_tensor((latent * 2).astype(np.float32))}


# ---------------------------------------------------------------------------
# handshake


def test_health_handshake_pins_shape_and_spec(stub):
    rb = RemoteBackend(stub.url)
    info = rb.connect()
    assert info["protocol_version"] == 1
    assert rb.shape == SHAPE
    assert rb.model_spec == "stub-checkpoint"
    assert rb.conditions is None and rb.adapters is None


def test_wrong_protocol_version_rejected(stub):
    stub.server.health = (200, {"protocol_version": 2, "latent_shape": list(SHAPE)})
    with pytest.raises(ProtocolVersionError):
        RemoteBackend(stub.url).connect()


def test_loading_service_reports_not_ready(stub):
    stub.server.health = (503, {"detail": "model loading"})
    with pytest.raises(NotReadyError):
        RemoteBackend(stub.url).connect()


def test_connection_refused_is_transport_error():
    rb = RemoteBackend("http://127.0.0.1:9", timeout=0.5)
    with pytest.raises(TransportError):
        rb.connect()


# ---------------------------------------------------------------------------
# predict


def test_predict_round_trip_and_request_shape(stub):
    stub.server.routes["/predict"] = _doubling_predict
    rb = RemoteBackend(stub.url)
    z = np.arange(4, dtype=np.float32).reshape(SHAPE)
    from conceptdistill.core import AdapterSpec
    out = rb.predict(z, 421, "tgt", [AdapterSpec(id="style", scale=0.8)])
    assert out.tobytes() == (z * 2).tobytes()
    path, body = stub.server.requests[-1]
    assert path == "/predict"
    assert body["condition"] == "tgt"
    assert body["timestep"] == 421
    assert body["adapters"] == [{"id": "style", "scale": 0.8}]
    assert decode_tensor(body["latent"]).tobytes() == z.tobytes()


def test_predict_maps_404_to_typed_errors(stub):
    rb = RemoteBackend(stub.url)
    z = np.zeros(SHAPE, dtype=np.float32)
    stub.server.routes["/predict"] = lambda body: (404, {"detail": "unknown condition 'x'"})
    with pytest.raises(UnknownConditionError):
        rb.predict(z, 1, "x")
    stub.server.routes["/predict"] = lambda body: (404, {"detail": "unknown adapter 'y'"})
    with pytest.raises(UnknownAdapterError):
        rb.predict(z, 1, "c")


def test_predict_maps_422_and_500(stub):
    rb = RemoteBackend(stub.url)
    z = np.zeros(SHAPE, dtype=np.float32)
    stub.server.routes["/predict"] = lambda body: (422, {"detail": "latent shape mismatch"})
    with pytest.raises(ShapeMismatchError):
        rb.predict(z, 1, "c")
    stub.server.routes["/predict"] = lambda body: (500, {"detail": "cuda exploded"})
    with pytest.raises(ServerError, match="cuda exploded"):
        rb.predict(z, 1, "c")


def test_predict_rejects_wrong_response_shape(stub):
    bad = np.zeros((1, 1, 1), dtype=np.float32)
    stub.server.routes["/predict"] = lambda body: (200, {"eps": encode_tensor(bad)})
    rb = RemoteBackend(stub.url)
    with pytest.raises(ShapeMismatchError):
        rb.predict(np.zeros(SHAPE, dtype=np.float32), 1, "c")


def test_predict_retries_once_on_timeout(stub):
    stub.server.routes["/predict"] = _doubling_predict
    stub.server.delays["/predict"] = 0.6
    stub.server.delay_counts["/predict"] = 1  # only the first call stalls
    rb = RemoteBackend(stub.url, timeout=0.3)
    rb._shape = SHAPE  # skip handshake; exercise just the predict path
    z = np.ones(SHAPE, dtype=np.float32)
    out = rb.predict(z, 1, "c")
    assert out.tobytes() == (z * 2).tobytes()
    predict_calls = [r for r in stub.server.requests if r[0] == "/predict"]
    assert len(predict_calls) == 2


def test_predict_surfaces_persistent_timeout(stub):
    stub.server.routes["/predict"] = _doubling_predict
    stub.server.delays["/predict"] = 0.6  # every call stalls
    rb = RemoteBackend(stub.url, timeout=0.2)
    rb._shape = SHAPE
    with pytest.raises(TransportError, match="timed out"):
        rb.predict(np.ones(SHAPE, dtype=np.float32), 1, "c")


# ---------------------------------------------------------------------------
# registration and codecs


def test_register_condition_ok_and_duplicate(stub):
    calls = []

    def register(body):
        calls.append(body)
        if any(c["name"] == body["name"] for c in calls[:-1]):
            return 409, {"detail": f"condition {body['name']!r} already registered"}
        return 200, {"ok": True}

    stub.server.routes["/register_condition"] = register
    rb = RemoteBackend(stub.url)
    rb.register_condition("src", "a photo of a cat")
    rb.register_condition("neg", "blurry, low quality", negative=True)
    assert calls[1]["negative"] is True
    with pytest.raises(DuplicateConditionError):
        rb.register_condition("src", "a photo of a cat")


def test_encode_decode_helpers(stub):
    latent = np.full(SHAPE, 0.5, dtype=np.float32)
    stub.server.routes["/encode"] = lambda body: (200, {"latent": encode_tensor(latent)})
    import base64
    stub.server.routes["/decode"] = lambda body: (
        200, {"image": base64.b64encode(b"png-bytes").decode("ascii")})
    rb = RemoteBackend(stub.url)
    got = rb.encode_image(b"fake-png")
    assert got.tobytes() == latent.tobytes()
    assert rb.decode_latent(latent) == b"png-bytes"


def test_tensor_codec_helpers_round_trip():
    x = np.random.default_rng(3).standard_normal((4, 8, 8), dtype=np.float32)
    assert decode_tensor(encode_tensor(x)).tobytes() == x.tobytes()
