"""Shared domain types, the CDST tensor codec, and elementwise latent math.

A latent tensor is a dense rank-3 numpy array laid out (channels, height,
width), row-major, float32, with every value finite.  All modules in this
package exchange latents in exactly this form; ``as_latent`` is the single
validation gate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

LATENT_DTYPE = np.float32


# ---------------------------------------------------------------------------
# Errors

class ShapeMismatchError(ValueError):
    """Operands (or a backend response) do not have the expected shape."""


class CodecError(ValueError):
    """Base class for CDST decode failures."""


class BadMagicError(CodecError):
    """Input does not start with the CDST magic bytes."""


class VersionMismatchError(CodecError):
    """Input declares a format version this codec does not speak."""


class BadHeaderError(CodecError):
    """Header fields are structurally invalid (rank, zero dimension)."""


class TruncatedPayloadError(CodecError):
    """Payload holds fewer values than the header promises."""


class NonFiniteValueError(CodecError):
    """Tensor carries NaN or Inf values."""


# ---------------------------------------------------------------------------
# Handles

@dataclass(frozen=True)
class AdapterSpec:
    """Names a concept adapter registered at a backend, with its scale."""

    id: str
    scale: float = 0.8

    def __post_init__(self):
        if not self.id:
            raise ValueError("adapter id must be non-empty")
        if not np.isfinite(self.scale):
            raise ValueError("adapter scale must be finite")
        if not 0.0 <= self.scale <= 2.0:
            raise ValueError(f"adapter scale {self.scale} outside [0, 2]")


# A condition reference is the opaque name of a prompt embedding registered
# at the backend; the engine never sees text encoders.
ConditionRef = str


# ---------------------------------------------------------------------------
# Latent validation

def as_latent(values, *, copy: bool = False) -> np.ndarray:
    """Validate and normalize an array-like into a (C, H, W) float32 latent."""
    x = np.array(values, dtype=LATENT_DTYPE, copy=True) if copy else \
        np.ascontiguousarray(values, dtype=LATENT_DTYPE)
    if x.ndim != 3:
        raise ShapeMismatchError(f"latent must be rank 3 (C, H, W), got rank {x.ndim}")
    if min(x.shape) < 1:
        raise ShapeMismatchError(f"latent dimensions must be >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("latent contains non-finite values")
    return x


# ---------------------------------------------------------------------------
# CDST codec
#
# Wire layout (little-endian throughout):
#   magic "CDST" | u32 version=1 | u32 rank=3 | u32 C | u32 H | u32 W
#   followed by C*H*W IEEE-754 binary32 values, row-major (W innermost).

CDST_MAGIC = b"CDST"
CDST_VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


def tensor_write(x) -> bytes:
    """Encode a latent into CDST bytes. Bit-exact inverse of ``tensor_read``."""
    x = as_latent(x)
    c, h, w = x.shape
    header = _HEADER.pack(CDST_MAGIC, CDST_VERSION, 3, c, h, w)
    return header + x.astype("<f4", copy=False).tobytes(order="C")


def tensor_read(data: bytes) -> np.ndarray:
    """Decode CDST bytes into a (C, H, W) float32 latent."""
    if len(data) < 4:
        raise TruncatedPayloadError(f"input too short for magic ({len(data)} bytes)")
    if data[:4] != CDST_MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {CDST_MAGIC!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"input too short for header ({len(data)} bytes)")
    _, version, rank, c, h, w = _HEADER.unpack_from(data)
    if version != CDST_VERSION:
        raise VersionMismatchError(f"format version {version}, expected {CDST_VERSION}")
    if rank != 3:
        raise BadHeaderError(f"rank {rank}, expected 3")
    if min(c, h, w) < 1:
        raise BadHeaderError(f"zero dimension in header (C={c}, H={h}, W={w})")
    count = c * h * w
    expected = _HEADER.size + 4 * count
    if len(data) < expected:
        raise TruncatedPayloadError(
            f"payload holds {(len(data) - _HEADER.size) // 4} of {count} values")
    if len(data) > expected:
        raise CodecError(f"{len(data) - expected} trailing bytes after payload")
    flat = np.frombuffer(data, dtype="<f4", count=count, offset=_HEADER.size)
    x = flat.astype(LATENT_DTYPE).reshape(c, h, w)
    if not np.all(np.isfinite(x)):
        raise NonFiniteValueError("payload contains non-finite values")
    return x


def read_latent(path) -> np.ndarray:
    with open(path, "rb") as f:
        return tensor_read(f.read())


def write_latent(path, x) -> None:
    with open(path, "wb") as f:
        f.write(tensor_write(x))


# ---------------------------------------------------------------------------
# Elementwise math
#
# Thin wrappers over numpy that refuse silent broadcasting between mismatched
# tensors; scalars are allowed where noted.

def _check_pair(a: np.ndarray, b) -> tuple[np.ndarray, np.ndarray | float]:
    if np.isscalar(b) or getattr(b, "ndim", None) == 0:
        return a, float(b)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"operand shapes differ: {a.shape} vs {b.shape}")
    return a, b


def add(a, b) -> np.ndarray:
    a, b = _check_pair(np.asarray(a), b)
    return (a + b).astype(LATENT_DTYPE, copy=False)


def sub(a, b) -> np.ndarray:
    a, b = _check_pair(np.asarray(a), b)
    return (a - b).astype(LATENT_DTYPE, copy=False)


def scale(a, s: float) -> np.ndarray:
    return (np.asarray(a) * float(s)).astype(LATENT_DTYPE, copy=False)


def hadamard(a, b) -> np.ndarray:
    a, b = _check_pair(np.asarray(a), b)
    return (a * b).astype(LATENT_DTYPE, copy=False)


_ELEMENTWISE = {"add": add, "sub": sub, "scale": scale, "hadamard": hadamard}


def elementwise(op: str, a, b) -> np.ndarray:
    """Dispatch one of {add, sub, scale, hadamard} by name."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)
