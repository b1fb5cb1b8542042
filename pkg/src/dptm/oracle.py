"""Gaussian-mixture world and its closed-form denoiser.

The world is an isotropic mixture indexed by (class, domain).  Under the
forward process ``z_t = a*x0 + sqrt(v)*eps`` (``a = sqrt(ab[t])``,
``v = 1 - ab[t]``) each component stays Gaussian, so ``E[x0 | z_t]`` and the
optimal noise prediction are available exactly.  A class condition restricts
the mixture to that class's components with renormalized weights; ``None``
means unconditional.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError, DimensionError, ValidationError
from .schedule import NoiseSchedule

ClassCondition = Optional[Union[int, np.ndarray]]
UNCONDITIONAL = None


@dataclass(frozen=True)
class MixtureWorld:
    means: np.ndarray = field(repr=False)  # (C, D, n, n)
    weights: np.ndarray = field(repr=False)  # (C, D)
    sigma_data: float

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        weights = np.array(self.weights, dtype=np.float64)
        if means.ndim != 4 or means.shape[2] != means.shape[3]:
            raise ConfigError(f"means must be (C, D, n, n), got {means.shape}", "means")
        if weights.shape != means.shape[:2]:
            raise ConfigError(f"weights shape {weights.shape} != {means.shape[:2]}", "weights")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be nonnegative and sum to 1", "weights")
        if not self.sigma_data >= 0:
            raise ConfigError(f"sigma_data must be >= 0, got {self.sigma_data}", "sigma_data")
        if not np.all(np.isfinite(means)):
            raise ConfigError("means must be finite", "means")
        means.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "sigma_data", float(self.sigma_data))

    @property
    def C(self) -> int:
        return self.means.shape[0]

    @property
    def D(self) -> int:
        return self.means.shape[1]

    @property
    def n(self) -> int:
        return self.means.shape[2]

    @classmethod
    def uniform(cls, means, sigma_data: float) -> MixtureWorld:
        means = np.asarray(means, dtype=np.float64)
        C, D = means.shape[:2]
        return cls(means, np.full((C, D), 1.0 / (C * D)), sigma_data)


def sample_data(world: MixtureWorld, c: int, d: int, rng: np.random.Generator, size: Optional[int] = None):
    """Draw ``mu[c, d] + sigma_data * g``; ``size`` gives a stack of draws."""
    if not (0 <= c < world.C and 0 <= d < world.D):
        raise IndexError(f"component ({c}, {d}) outside ({world.C}, {world.D})")
    shape = (world.n, world.n) if size is None else (size, world.n, world.n)
    g = rng.standard_normal(shape)
    return world.means[c, d] + world.sigma_data * g


def _flatten(world: MixtureWorld, z) -> tuple[np.ndarray, tuple]:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim < 2 or z.shape[-2:] != (world.n, world.n):
        raise DimensionError(f"grid shape {z.shape} does not match world side {world.n}")
    lead = z.shape[:-2]
    return z.reshape(-1, world.n * world.n), lead


def _log_prior(world: MixtureWorld, cond: ClassCondition, batch: int) -> np.ndarray:
    """Per-sample component log-weights, shape (B, C*D)."""
    with np.errstate(divide="ignore"):
        logw = np.log(world.weights)  # (C, D)
    if cond is None:
        return np.broadcast_to(logw.reshape(1, -1), (batch, world.C * world.D))
    labels = np.broadcast_to(np.asarray(cond, dtype=np.int64).reshape(-1), (batch,))
    if np.any(labels < 0) or np.any(labels >= world.C):
        raise IndexError(f"class condition outside [0, {world.C})")
    keep = np.arange(world.C)[None, :] == labels[:, None]  # (B, C)
    out = np.where(keep[:, :, None], logw[None], -np.inf)
    out = out.reshape(batch, -1)
    norm = logsumexp(out, axis=1, keepdims=True)
    if not np.all(np.isfinite(norm)):
        raise ValidationError("conditioned class has zero total weight")
    return out - norm


def _coefficients(world: MixtureWorld, t: int, schedule: NoiseSchedule):
    t = schedule.check_step(t)
    if t == 0:
        raise ValidationError("denoising is undefined at t=0")
    a = np.sqrt(schedule.alpha_bar[t])
    v = 1.0 - schedule.alpha_bar[t]
    var = a * a * world.sigma_data**2 + v
    return a, v, var


def _sq_dist(zf: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = zf[:, None, :] - centers[None, :, :]
    return np.einsum("bkp,bkp->bk", diff, diff)


def responsibilities(world: MixtureWorld, z_t, t: int, cond: ClassCondition, schedule: NoiseSchedule):
    """Posterior component weights given ``z_t``; rows sum to 1."""
    zf, lead = _flatten(world, z_t)
    a, _, var = _coefficients(world, t, schedule)
    mu = world.means.reshape(world.C * world.D, -1)
    logits = _log_prior(world, cond, zf.shape[0]) - _sq_dist(zf, a * mu) / (2.0 * var)
    r = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    r /= r.sum(axis=1, keepdims=True)
    return r.reshape(lead + (world.C * world.D,))


def posterior_x0(world: MixtureWorld, z_t, t: int, cond: ClassCondition, schedule: NoiseSchedule) -> np.ndarray:
    """``E[x0 | z_t, cond]`` as a responsibility-weighted sum of component posteriors."""
    z = np.asarray(z_t, dtype=np.float64)
    a, _, var = _coefficients(world, t, schedule)
    r = responsibilities(world, z, t, cond, schedule)
    mu = world.means.reshape(world.C * world.D, world.n, world.n)
    gain = a * world.sigma_data**2 / var
    mean_mu = np.einsum("...k,kij->...ij", r, mu)
    # sum_i r_i (mu_i + gain (z - a mu_i)) with sum_i r_i = 1
    return (1.0 - gain * a) * mean_mu + gain * z


def eps_theta(world: MixtureWorld, z_t, t: int, cond: ClassCondition, schedule: NoiseSchedule) -> np.ndarray:
    """Optimal noise prediction ``(z_t - a E[x0|z_t]) / sqrt(v)``."""
    z = np.asarray(z_t, dtype=np.float64)
    a, v, _ = _coefficients(world, t, schedule)
    x0 = posterior_x0(world, z, t, cond, schedule)
    return (z - a * x0) / np.sqrt(v)


def log_marginal(world: MixtureWorld, z_t, t: int, cond: ClassCondition, schedule: NoiseSchedule) -> np.ndarray:
    """Closed-form ``log q_t(z_t | cond)`` including the Gaussian normalizer."""
    zf, lead = _flatten(world, z_t)
    a, _, var = _coefficients(world, t, schedule)
    mu = world.means.reshape(world.C * world.D, -1)
    P = zf.shape[1]
    logits = _log_prior(world, cond, zf.shape[0]) - _sq_dist(zf, a * mu) / (2.0 * var)
    out = logsumexp(logits, axis=1) - 0.5 * P * np.log(2.0 * np.pi * var)
    return out.reshape(lead)


def bayes_class_probs(world: MixtureWorld, x, project=None) -> np.ndarray:
    """Class posterior of clean samples under the world, marginalizing domains.

    ``project`` (e.g. a band filter) is applied to ``x - mu`` before scoring;
    it must be an orthogonal projector for the result to be a true posterior
    of the projected data.
    """
    if world.sigma_data <= 0:
        raise ValidationError("Bayes posterior needs sigma_data > 0")
    zf, lead = _flatten(world, x)
    mu = world.means.reshape(world.C * world.D, world.n, world.n)
    if project is None:
        d2 = _sq_dist(zf, mu.reshape(world.C * world.D, -1))
    else:
        grids = zf.reshape(-1, 1, world.n, world.n) - mu[None]
        diff = project(grids).reshape(zf.shape[0], world.C * world.D, -1)
        d2 = np.einsum("bkp,bkp->bk", diff, diff)
    with np.errstate(divide="ignore"):
        logw = np.log(world.weights).reshape(1, -1)
    logits = (logw - d2 / (2.0 * world.sigma_data**2)).reshape(-1, world.C, world.D)
    per_class = logsumexp(logits, axis=2)
    p = np.exp(per_class - logsumexp(per_class, axis=1, keepdims=True))
    return p.reshape(lead + (world.C,))
