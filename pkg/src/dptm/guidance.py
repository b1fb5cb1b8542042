"""Classifier-free guidance and deterministic DDIM steps in both directions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, OrderingError
from .oracle import ClassCondition, MixtureWorld, eps_theta
from .schedule import NoiseSchedule


@dataclass(frozen=True)
class GuidanceConfig:
    gamma1: float = 5.5  # denoising guidance scale
    gamma2: float = 0.0  # inversion guidance scale
    S: int = 20  # inference steps

    def __post_init__(self):
        if int(self.S) != self.S or self.S < 1:
            raise ConfigError(f"S must be a positive integer, got {self.S}", "S")
        for name in ("gamma1", "gamma2"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError("guidance scale must be finite", name)


def cfg_eps(eps_cond, eps_uncond, gamma: float) -> np.ndarray:
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    if eps_cond.shape != eps_uncond.shape:
        raise DimensionError(f"{eps_cond.shape} vs {eps_uncond.shape}")
    return (1.0 + gamma) * eps_cond - gamma * eps_uncond


def guided_eps(world: MixtureWorld, z, t: int, cond: ClassCondition, gamma: float, schedule: NoiseSchedule):
    """Oracle noise prediction with guidance scale ``gamma`` toward ``cond``."""
    e_c = eps_theta(world, z, t, cond, schedule)
    if gamma == 0 or cond is None:
        return e_c
    e_u = eps_theta(world, z, t, None, schedule)
    return cfg_eps(e_c, e_u, gamma)


def _pair(t: int, t_prev: int, schedule: NoiseSchedule):
    t = schedule.check_step(t)
    t_prev = schedule.check_step(t_prev)
    if not t > t_prev:
        raise OrderingError(f"need t > t_prev, got t={t}, t_prev={t_prev}")
    return schedule.alpha_bar[t], schedule.alpha_bar[t_prev]


def ddim_step(z_t, t: int, t_prev: int, eps_bar, schedule: NoiseSchedule) -> np.ndarray:
    """Deterministic DDIM update ``z_t -> z_{t_prev}`` for a given noise field."""
    ab, ab_prev = _pair(t, t_prev, schedule)
    z_t = np.asarray(z_t, dtype=np.float64)
    eps_bar = np.asarray(eps_bar, dtype=np.float64)
    x0_hat = (z_t - np.sqrt(1.0 - ab) * eps_bar) / np.sqrt(ab)
    return np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps_bar


def ddim_invert_with_eps(z_prev, t: int, t_prev: int, eps, schedule: NoiseSchedule) -> np.ndarray:
    """Algebraic inverse of :func:`ddim_step` under a fixed noise field."""
    ab, ab_prev = _pair(t, t_prev, schedule)
    z_prev = np.asarray(z_prev, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    coef = np.sqrt(ab) * (np.sqrt(1.0 / ab - 1.0) - np.sqrt(1.0 / ab_prev - 1.0))
    return np.sqrt(ab / ab_prev) * z_prev + coef * eps


def ddim_invert_step(
    z_prev,
    t: int,
    t_prev: int,
    cond: ClassCondition,
    gc: GuidanceConfig,
    world: MixtureWorld,
    schedule: NoiseSchedule,
) -> np.ndarray:
    """One DDIM inversion step ``z_{t_prev} -> z_t``.

    The noise is evaluated at ``(z_prev, t_prev)`` (first-order inversion) and
    guided with ``gc.gamma2``; at ``gamma2 = 0`` it is the plain conditional
    prediction.
    """
    _pair(t, t_prev, schedule)
    eps = guided_eps(world, z_prev, t_prev, cond, gc.gamma2, schedule)
    return ddim_invert_with_eps(z_prev, t, t_prev, eps, schedule)


def ddim_sample(z_start, steps, cond: ClassCondition, gamma: float, world: MixtureWorld, schedule: NoiseSchedule):
    """Run guided DDIM along the decreasing timestep list ``steps``.

    Returns the latent at ``steps[-1]``.
    """
    z = np.asarray(z_start, dtype=np.float64)
    for t, t_prev in zip(steps[:-1], steps[1:]):
        z = ddim_step(z, t, t_prev, guided_eps(world, z, t, cond, gamma, schedule), schedule)
    return z


def ddim_invert(z_end, steps, cond: ClassCondition, gc: GuidanceConfig, world: MixtureWorld, schedule: NoiseSchedule):
    """Invert a trajectory produced by :func:`ddim_sample` back to ``steps[0]``."""
    z = np.asarray(z_end, dtype=np.float64)
    for t, t_prev in zip(steps[-2::-1], steps[:0:-1]):
        z = ddim_invert_step(z, t, t_prev, cond, gc, world, schedule)
    return z
