"""
The analytic backend
====================

A Gaussian data model whose optimal noise predictor has a closed form.
It stands in for a neural denoiser wherever exact answers are needed:
conditions shift the mean, adapters add masked deltas, and every
prediction is reproducible to the bit.
"""

import numpy as np

from conceptdistill import build_noise_schedule, guided_predict, predict
from conceptdistill.core import AdapterSpec
from conceptdistill.predictor import GaussianConceptModel

sched = build_noise_schedule("scaled_linear", 1000, 0.00085, 0.012)
shape = (2, 4, 4)

# "cat" shifts the mean up in the top half, "dog" in the bottom half
cat = np.zeros(shape)
cat[:, :2, :] = 2.0
dog = np.zeros(shape)
dog[:, 2:, :] = 2.0

# one adapter sharpens the top-left corner only
delta = np.zeros(shape)
delta[:, :2, :2] = 5.0
mask = np.zeros(shape[1:], dtype=bool)
mask[:2, :2] = True

model = GaussianConceptModel(
    mu_base=np.zeros(shape),
    sigma2=0.04,
    schedule=sched,
    conditions={"base": 0.0, "cat": cat, "dog": dog},
    adapters={"corner": (delta, mask)},
)

print("conditions:", sorted(model.conditions))
print("adapters:  ", sorted(model.adapters))

rng = np.random.default_rng(7)
z = rng.normal(size=shape).astype(np.float32)

# the predictor sees more "cat" evidence missing from the top half
eps_cat = predict(model, z, 500, "cat")
eps_dog = predict(model, z, 500, "dog")
print("cat vs dog predictions differ:", not np.array_equal(eps_cat, eps_dog))

# adapters only touch their masked region
plain = predict(model, z, 500, "base")
with_adapter = predict(model, z, 500, "base",
                       adapters=(AdapterSpec(id="corner", scale=1.0),))
changed = ~np.isclose(plain, with_adapter)
print("adapter changed the corner only:",
      changed[:, :2, :2].all() and not changed[:, 2:, :].any())

# negative guidance extrapolates away from an unwanted condition:
# (1 + lam) eps(pos) - lam eps(neg)
guided = guided_predict(model, z, 500, "cat", "dog", 7.0)
print("guided prediction shape:", guided.shape, guided.dtype)
print("lam=0 collapses to the positive branch:",
      np.array_equal(guided_predict(model, z, 500, "cat", "dog", 0.0), eps_cat))
