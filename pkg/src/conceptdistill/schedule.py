"""Diffusion noise schedules, forward noising, and descending timestep plans.

The optimization loop walks a strictly descending sequence of discrete
timesteps instead of sampling them uniformly at random; this module builds
both the schedule (cumulative signal fractions) and that plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LATENT_DTYPE, ShapeMismatchError

# Stable Diffusion v1.5 convention; the backbone fixes these, so remote runs
# must construct the engine schedule to match the server's.
DEFAULT_SCHEDULE_KIND = "scaled_linear"
DEFAULT_T = 1000
DEFAULT_BETA_START = 0.00085
DEFAULT_BETA_END = 0.012
DEFAULT_T_MAX = 970
DEFAULT_T_MIN = 30


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step cumulative signal fractions of a discrete forward process.

    ``alpha_bar[t - 1]`` holds the signal fraction at timestep t (1-indexed),
    strictly decreasing and inside (0, 1).
    """

    alpha_bar: np.ndarray  # float64, shape (T,)

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.ndim != 1 or ab.size < 1:
            raise ValueError("alpha_bar must be a non-empty 1-D sequence")
        if not (np.all(ab > 0.0) and np.all(ab < 1.0)):
            raise ValueError("every alpha_bar value must lie in (0, 1)")
        if ab.size > 1 and not np.all(np.diff(ab) < 0.0):
            raise ValueError("alpha_bar must be strictly decreasing")
        object.__setattr__(self, "alpha_bar", ab)

    @property
    def T(self) -> int:
        return int(self.alpha_bar.size)

    def alpha_bar_at(self, t: int) -> float:
        """Signal fraction at 1-indexed timestep t."""
        if not 1 <= t <= self.T:
            raise ValueError(f"timestep {t} outside [1, {self.T}]")
        return float(self.alpha_bar[t - 1])


@dataclass(frozen=True)
class TimestepPlan:
    """Strictly descending sequence of discrete timesteps."""

    steps: tuple[int, ...]

    def __post_init__(self):
        if len(self.steps) < 1:
            raise ValueError("plan must hold at least one timestep")
        if any(t < 1 for t in self.steps):
            raise ValueError("timesteps must be >= 1")
        if any(a <= b for a, b in zip(self.steps, self.steps[1:])):
            raise ValueError("timesteps must be strictly decreasing")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)


def build_noise_schedule(kind: str, T: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Build a schedule from a per-step noise-rate ramp.

    ``linear`` ramps beta itself; ``scaled_linear`` ramps sqrt(beta) linearly
    and squares it (the Stable Diffusion v1.5 convention).  The cumulative
    signal fraction is the running product of (1 - beta_s).
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ValueError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})")
    if kind == "linear":
        betas = np.linspace(beta_start, beta_end, T, dtype=np.float64)
    elif kind == "scaled_linear":
        betas = np.linspace(math.sqrt(beta_start), math.sqrt(beta_end), T,
                            dtype=np.float64) ** 2
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return NoiseSchedule(alpha_bar=np.cumprod(1.0 - betas))


def plan_timesteps(K: int, t_max: int, t_min: int) -> TimestepPlan:
    """Place K timesteps evenly (after rounding) from t_max down to t_min."""
    if not 1 <= t_min <= t_max:
        raise ValueError(f"need 1 <= t_min <= t_max, got ({t_min}, {t_max})")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if K > t_max - t_min + 1:
        raise ValueError(
            f"K={K} exceeds the {t_max - t_min + 1} integers in [{t_min}, {t_max}]; "
            "choose a smaller K")
    if K == 1:
        return TimestepPlan(steps=(t_max,))
    span = t_max - t_min
    # round half up; spacing >= 1 is guaranteed by the K bound above
    steps = tuple(int(math.floor(t_max - k * span / (K - 1) + 0.5)) for k in range(K))
    if any(a <= b for a, b in zip(steps, steps[1:])):
        raise ValueError(
            f"rounding collapsed the plan for K={K} on [{t_min}, {t_max}]; "
            "choose a smaller K")
    return TimestepPlan(steps=steps)


def noise_with_alpha_bar(x0: np.ndarray, eps: np.ndarray, alpha_bar: float) -> np.ndarray:
    """Forward-noise with an explicit signal fraction: sqrt(a)*x0 + sqrt(1-a)*eps."""
    if x0.shape != eps.shape:
        raise ShapeMismatchError(f"x0 shape {x0.shape} != eps shape {eps.shape}")
    if not 0.0 <= alpha_bar <= 1.0:
        raise ValueError(f"alpha_bar {alpha_bar} outside [0, 1]")
    a = math.sqrt(alpha_bar)
    b = math.sqrt(1.0 - alpha_bar)
    return (a * x0 + b * eps).astype(LATENT_DTYPE, copy=False)


def add_noise(x0: np.ndarray, eps: np.ndarray, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Noise x0 to timestep t of the schedule."""
    return noise_with_alpha_bar(x0, eps, sched.alpha_bar_at(t))
