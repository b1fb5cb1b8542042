"""Discrete diffusion schedule and the forward (noising) process.

A single cumulative ``alpha_bar`` array is the source of truth: the signal
scale at step ``t`` is ``sqrt(alpha_bar[t])`` and the noise scale is
``sqrt(1 - alpha_bar[t])``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError


@dataclass(frozen=True)
class NoiseSchedule:
    T_train: int
    alpha_bar: np.ndarray = field(repr=False)

    def __post_init__(self):
        ab = np.asarray(self.alpha_bar, dtype=np.float64)
        if ab.shape != (self.T_train + 1,):
            raise ConfigError(f"alpha_bar must have length {self.T_train + 1}", "alpha_bar")
        ab.setflags(write=False)
        object.__setattr__(self, "alpha_bar", ab)

    def signal(self, t: int) -> float:
        return float(np.sqrt(self.alpha_bar[t]))

    def noise(self, t: int) -> float:
        return float(np.sqrt(1.0 - self.alpha_bar[t]))

    def check_step(self, t: int) -> int:
        t = int(t)
        if not 0 <= t <= self.T_train:
            raise IndexError(f"step {t} outside [0, {self.T_train}]")
        return t

    def step_indices(self, S: int) -> np.ndarray:
        """Strictly decreasing inference timesteps, from ``T_train`` down to 1.

        The grid is a uniformly strided ``linspace`` rounded to integers, so
        every step count covers the same time range.
        """
        S = int(S)
        if not 1 <= S <= self.T_train:
            raise ConfigError(f"need 1 <= S <= {self.T_train}, got {S}", "S")
        if S == 1:
            return np.array([self.T_train], dtype=np.int64)
        idx = np.rint(np.linspace(self.T_train, 1, S)).astype(np.int64)
        return idx


def make_linear_schedule(T_train: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02) -> NoiseSchedule:
    if int(T_train) != T_train or T_train < 1:
        raise ConfigError(f"T_train must be a positive integer, got {T_train}", "T_train")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigError(
            f"need 0 < beta_start <= beta_end < 1, got ({beta_start}, {beta_end})", "beta_start"
        )
    T_train = int(T_train)
    betas = np.linspace(beta_start, beta_end, T_train, dtype=np.float64)
    alpha_bar = np.empty(T_train + 1)
    alpha_bar[0] = 1.0
    alpha_bar[1:] = np.cumprod(1.0 - betas)
    return NoiseSchedule(T_train, alpha_bar)


def forward_noise(x0, t: int, noise, schedule: NoiseSchedule) -> np.ndarray:
    """``sqrt(ab[t]) * x0 + sqrt(1 - ab[t]) * noise``; works on batches too."""
    t = schedule.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    try:
        np.broadcast_shapes(x0.shape, noise.shape)
    except ValueError:
        raise DimensionError(f"x0 shape {x0.shape} and noise shape {noise.shape} do not broadcast") from None
    return schedule.signal(t) * x0 + schedule.noise(t) * noise
