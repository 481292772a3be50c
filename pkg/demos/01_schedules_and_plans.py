"""
Noise schedules and timestep plans
==================================

The forward process mixes a clean latent with noise according to the
cumulative signal fraction alpha_bar(t).  Editing walks a strictly
descending list of timesteps, so coarse noise levels come first.
"""

import numpy as np

from conceptdistill import add_noise, build_noise_schedule, plan_timesteps

# the default schedule: 1000 steps, square-root beta ramp
sched = build_noise_schedule("scaled_linear", 1000, 0.00085, 0.012)
for t in (1, 30, 250, 500, 750, 970):
    print(f"t={t:4d}  alpha_bar={sched.alpha_bar_at(t):.6f}")

# alpha_bar decays monotonically: nearly all signal at t=1,
# nearly all noise at t=970
assert sched.alpha_bar_at(1) > 0.999
assert sched.alpha_bar_at(970) < 0.01

# a plan spreads K steps evenly over [t_min, t_max], descending
plan = plan_timesteps(10, 970, 30)
print("10-step plan:", plan.steps)

plan = plan_timesteps(5, 90, 10)
print("5 steps over [10, 90]:", plan.steps)

# noising a latent: x_t = sqrt(abar) x0 + sqrt(1 - abar) eps
x0 = np.full((1, 2, 2), 2.0, dtype=np.float32)
eps = np.ones((1, 2, 2), dtype=np.float32)
for t in (30, 500, 970):
    z = add_noise(x0, eps, t, sched)
    print(f"t={t:4d}  noised value {z[0, 0, 0]:.4f}  (signal fades, noise grows)")
