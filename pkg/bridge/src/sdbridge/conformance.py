"""Golden-fixture plumbing: record one /predict exchange, replay it later.

The fixture pins the reference session (model spec, seed, demo adapters,
one registered condition) plus a request and the bytes it returned when
recorded.  Any later build must reproduce those bytes within tolerance.

    python3 -m sdbridge.conformance fixtures/golden_predict.json
"""

import json
from pathlib import Path

import numpy as np

from .codec import tensor_to_b64
from .server import build_demo_session
from .session import BridgeSession

FIXTURE_MODEL_SPEC = "tiny-unet-v1"
FIXTURE_SEED = 0
FIXTURE_CONDITION = "golden-src"
FIXTURE_CONDITION_TEXT = "a photo of a person, studio lighting"
REPLAY_TOLERANCE = 1e-5


def build_reference_session(adapter_dir=None) -> BridgeSession:
    session = build_demo_session(FIXTURE_MODEL_SPEC, FIXTURE_SEED, adapter_dir)
    session.register_condition(FIXTURE_CONDITION, FIXTURE_CONDITION_TEXT)
    return session


def fixture_request() -> dict:
    rng = np.random.default_rng(np.random.Philox(31337))
    latent = rng.standard_normal((4, 64, 64), dtype=np.float32)
    return {
        "condition": FIXTURE_CONDITION,
        "timestep": 500,
        "adapters": [{"id": "sunglasses", "scale": 0.8}],
        "latent": tensor_to_b64(latent),
    }


def generate_fixture(path) -> dict:
    session = build_reference_session()
    request = fixture_request()
    from .codec import tensor_from_b64

    eps = session.predict(request["condition"], request["timestep"],
                          request["adapters"],
                          tensor_from_b64(request["latent"]))
    fixture = {
        "model_spec": FIXTURE_MODEL_SPEC,
        "seed": FIXTURE_SEED,
        "condition_text": FIXTURE_CONDITION_TEXT,
        "tolerance": REPLAY_TOLERANCE,
        "request": request,
        "response": {"eps": tensor_to_b64(eps)},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(fixture, indent=2) + "\n", encoding="utf-8")
    return fixture


def load_fixture(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


if __name__ == "__main__":
    import sys

    out = sys.argv[1] if len(sys.argv) > 1 else "golden_predict.json"
    generate_fixture(out)
    print(f"wrote {out}")
