"""
Editing gradients
=================

Three related update rules, all built from noise-prediction deltas:

  sds:  w(t) (eps_pred - eps_sampled)          match the sampled noise
  dds:  w(t) (eps_target - eps_source)         move between conditions
  cds:  reg(eta, x_tgt - x_src) + dds          dds plus a pull back
                                               toward the source latent

The regularizer keeps edits from drifting: raise eta and the output
stays closer to where it started.
"""

import numpy as np

from conceptdistill import cds_grad, dds_grad, sds_grad
from conceptdistill.distill import GradConfig

rng = np.random.default_rng(11)
shape = (1, 4, 4)
eps_tgt = rng.normal(size=shape).astype(np.float32)
eps_src = rng.normal(size=shape).astype(np.float32)
x_tgt = rng.normal(size=shape).astype(np.float32)
x_src = rng.normal(size=shape).astype(np.float32)

# sds against its own sampled noise
r = sds_grad(eps_tgt, eps_src, t=500)
print("sds grad norm:", np.linalg.norm(r.grad))

# dds vanishes when both branches agree, by construction
r = dds_grad(eps_tgt, eps_tgt, t=500)
print("dds with identical branches:", np.abs(r.grad).max())

# cds = regularizer + dds; eta=0 strips the regularizer entirely
cfg0 = GradConfig(eta=0.0)
same = np.array_equal(
    cds_grad(eps_tgt, eps_src, x_tgt, x_src, cfg0, 500).grad,
    dds_grad(eps_tgt, eps_src, 500).grad)
print("cds at eta=0 equals dds bitwise:", same)

# the regularizer grows linearly with eta
for eta in (0.1, 0.5, 2.0):
    cfg = GradConfig(eta=eta)
    r = cds_grad(eps_tgt, eps_src, x_tgt, x_src, cfg, 500)
    print(f"eta={eta:<4} regularizer norm {r.regularizer_norm:.4f}"
          f"  noise delta norm {r.noise_delta_norm:.4f}")

# three regularizer flavours of the same pull
for mode in ("l2_signed", "l1_sign", "literal_abs"):
    cfg = GradConfig(eta=1.0, regularizer_mode=mode)
    g = cds_grad(eps_tgt, eps_tgt, x_tgt, x_src, cfg, 500).grad
    print(f"{mode:<12} first values {np.round(g[0, 0, :3], 4)}")
