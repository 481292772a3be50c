"""Binary tensor container used on the wire.

Layout: magic "CDST", little-endian u32 version (1), rank (always 3),
the three dimension sizes, then row-major float32 payload.  Kept
self-contained so the service has no dependency on any particular
client library.
"""

import base64
import struct

import numpy as np

MAGIC = b"CDST"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class CodecError(ValueError):
    pass


def tensor_to_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if arr.ndim != 3:
        raise CodecError(f"expected a rank-3 tensor, got rank {arr.ndim}")
    c, h, w = arr.shape
    return _HEADER.pack(MAGIC, VERSION, 3, c, h, w) + arr.tobytes()


def tensor_from_bytes(blob: bytes) -> np.ndarray:
    if len(blob) < _HEADER.size:
        raise CodecError("payload shorter than the header")
    magic, version, rank, c, h, w = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CodecError(f"bad magic {magic!r}")
    if version != VERSION:
        raise CodecError(f"unsupported container version {version}")
    if rank != 3 or min(c, h, w) < 1:
        raise CodecError(f"bad header: rank {rank}, dims {(c, h, w)}")
    expected = c * h * w * 4
    payload = blob[_HEADER.size:]
    if len(payload) != expected:
        raise CodecError(f"payload holds {len(payload)} bytes, need {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    if not np.isfinite(arr).all():
        raise CodecError("payload contains non-finite values")
    return arr.copy()


def tensor_to_b64(arr: np.ndarray) -> str:
    return base64.b64encode(tensor_to_bytes(arr)).decode("ascii")


def tensor_from_b64(text: str) -> np.ndarray:
    try:
        blob = base64.b64decode(text.encode("ascii"), validate=True)
    except Exception as exc:
        raise CodecError(f"invalid base64 payload: {exc}") from exc
    return tensor_from_bytes(blob)
