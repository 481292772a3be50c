"""
Latent tensor files
===================

Every latent, noise prediction, and gradient dump moves through one tiny
binary container: magic bytes, a version, a (C, H, W) header, then raw
float32 rows.  This walks the round trip and the failure modes.
"""

import numpy as np

from conceptdistill import read_latent, tensor_read, tensor_write, write_latent
from conceptdistill.core import CodecError

# a small latent: 2 channels on a 4x4 plane
rng = np.random.default_rng(0)
latent = rng.normal(0.0, 1.0, (2, 4, 4)).astype(np.float32)

path = "demo_out/latent.cdst"
import os
os.makedirs("demo_out", exist_ok=True)
write_latent(path, latent)
print("wrote", path, "->", os.path.getsize(path), "bytes")
# 24 header bytes + 2*4*4 floats * 4 bytes
print("expected size:", 24 + latent.size * 4)

back = read_latent(path)
print("round trip bitwise equal:", np.array_equal(back, latent))
print("dtype preserved:", back.dtype)

# the same codec works on in-memory bytes
blob = tensor_write(latent)
print("in-memory round trip:", np.array_equal(tensor_read(blob), latent))

# corrupt inputs fail loudly with a typed error, never silently
try:
    tensor_read(b"JUNK" + blob[4:])
except CodecError as exc:
    print("bad magic rejected:", exc)

try:
    tensor_read(blob[:30])
except CodecError as exc:
    print("short payload rejected:", exc)
