"""
Remote backends
===============

The editor does not care where noise predictions come from.  A remote
backend speaks a small HTTP protocol (health, register_condition,
predict, encode, decode) and plugs into the same run loop as the
analytic model.

This demo needs a server.  The companion bridge package in bridge/
provides one:

    python3 -m sdbridge.server --port 8901

then:

    CDS_BACKEND_URL=http://127.0.0.1:8901 python3 demos/08_remote_backend.py

Without a server the demo explains itself and exits cleanly.
"""

import os
import sys

import numpy as np

from conceptdistill.cli import main
from conceptdistill.remote import RemoteBackend, TransportError

url = os.environ.get("CDS_BACKEND_URL")
if not url:
    print("set CDS_BACKEND_URL to a running backend to exercise this demo;")
    print("see the docstring for how to start the bridge server.")
    sys.exit(0)

backend = RemoteBackend(url, timeout=10.0)
try:
    info = backend.connect()
except TransportError as exc:
    print("could not reach backend:", exc)
    sys.exit(1)

print("protocol version:", info["protocol_version"])
print("latent shape:    ", backend.shape)
print("model spec:      ", backend.model_spec)

# the CLI's conformance probe runs the same handshake plus a round trip
print("\n== check-backend ==")
code = main(["check-backend", "--backend-url", url])
print("exit code:", code)

# direct use: register a condition, then ask for a prediction
try:
    backend.register_condition("demo condition", "a photo of a sunflower")
except Exception as exc:
    print("register:", exc)

z = np.zeros(backend.shape, dtype=np.float32)
eps = backend.predict(z, 500, "demo condition")
print("\nprediction:", eps.shape, eps.dtype,
      "norm %.4f" % np.linalg.norm(eps))
again = backend.predict(z, 500, "demo condition")
print("deterministic:", np.array_equal(eps, again))
