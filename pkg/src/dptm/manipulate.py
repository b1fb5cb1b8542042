"""Non-trust sample manipulation: label assignment, target-guided
initialization, zigzag semantic injection and low-band domain preservation.

Per inference step ``t -> t_prev`` (both >= 1) the latent goes through

1. guided DDIM step ``z_t -> z_tmp`` (scale ``gamma1``),
2. DDIM inversion ``z_tmp -> z_tilde`` at scale ``gamma2``,
3. band mixing ``z_tilde_p = low(forward_noise(z0_hat, t)) + high(z_tilde)``,
4. guided DDIM step ``z_tilde_p -> z_{t_prev}``.

On the final step down to ``t = 0`` the inversion is skipped (it would need
the denoiser at ``t = 0``, where it is undefined); band mixing and the guided
step still run, so the output keeps the target low band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DimensionError
from .freq import FrequencyMask, max_radius, mix_bands
from .guidance import GuidanceConfig, ddim_invert_step, ddim_step, guided_eps
from .oracle import MixtureWorld
from .rng import stream
from .schedule import NoiseSchedule, forward_noise

CHUNK = 256


@dataclass(frozen=True)
class ManipulationConfig:
    schedule: NoiseSchedule = field(repr=False)
    guidance: GuidanceConfig = GuidanceConfig()
    rho_init: float = 2.0
    rho_mix: float = 2.0
    # Guidance scale of the re-denoise pass; None reuses gamma1.
    redenoise_gamma: Optional[float] = None

    def __post_init__(self):
        for name in ("rho_init", "rho_mix"):
            rho = getattr(self, name)
            if np.isnan(rho):
                raise ConfigError("cutoff must be a number", name)
        if self.guidance.S > self.schedule.T_train:
            raise ConfigError("more inference steps than schedule steps", "S")

    def masks(self, n: int) -> tuple[FrequencyMask, FrequencyMask]:
        for name in ("rho_init", "rho_mix"):
            rho = getattr(self, name)
            # negative = empty low band, >= max radius = all-pass
            if rho > max_radius(n) and np.isfinite(rho):
                raise ConfigError(f"cutoff above {max_radius(n):.3f} for n={n}; use inf for all-pass", name)
        return FrequencyMask.from_radius(n, self.rho_init), FrequencyMask.from_radius(n, self.rho_mix)

    @property
    def gamma_redenoise(self) -> float:
        return self.guidance.gamma1 if self.redenoise_gamma is None else self.redenoise_gamma


@dataclass(frozen=True)
class TraceStep:
    t: int
    z_t: np.ndarray
    z_tilde: np.ndarray
    z0_t: np.ndarray
    z_tilde_prime: np.ndarray


@dataclass(frozen=True)
class ManipulatedSample:
    output: np.ndarray
    assigned_label: int
    source_sample: np.ndarray
    z_T: Optional[np.ndarray] = None
    trace: Optional[tuple] = None  # of TraceStep, decreasing t


def assign_labels(count_U: int, C: int) -> np.ndarray:
    """Round-robin class labels over the first ``floor(count_U / C) * C`` samples."""
    if int(C) != C or C < 1:
        raise ConfigError(f"class count must be >= 1, got {C}", "C")
    if count_U < 0:
        raise ConfigError("sample count must be nonnegative", "count_U")
    kept = (count_U // C) * C
    if kept == 0 and count_U > 0:
        warnings.warn(f"{count_U} non-trust samples < {C} classes; all discarded", stacklevel=2)
    return np.arange(kept, dtype=np.int64) % C


def target_guided_init(x_u, rho_init, schedule: NoiseSchedule, rng: np.random.Generator, t_start: Optional[int] = None):
    """Return ``(z_T, z0_hat)``: the low band of ``x_u`` over Gaussian high band, then noised.

    ``rho_init`` may be a radius or a ready :class:`FrequencyMask`.
    """
    x_u = np.asarray(x_u, dtype=np.float64)
    H = rho_init if isinstance(rho_init, FrequencyMask) else FrequencyMask.from_radius(x_u.shape[-1], rho_init)
    t_start = schedule.T_train if t_start is None else t_start
    I_G = rng.standard_normal(x_u.shape)
    z0_hat = mix_bands(x_u, I_G, H)
    z_T = forward_noise(z0_hat, t_start, rng.standard_normal(x_u.shape), schedule)
    return z_T, z0_hat


def _manipulate_batch(X, labels, cfg: ManipulationConfig, world: MixtureWorld, rngs, keep_trace: bool):
    X = np.asarray(X, dtype=np.float64)
    n = world.n
    if X.shape[1:] != (n, n):
        raise DimensionError(f"samples {X.shape[1:]} do not match world side {n}")
    sched = cfg.schedule
    gc = cfg.guidance
    H_init, H_mix = cfg.masks(n)
    steps = [int(t) for t in sched.step_indices(gc.S)]
    pairs = list(zip(steps[:-1], steps[1:]))
    B = X.shape[0]

    # Per-sample draw order is fixed: I_G, z_T noise, then one grid per zigzag step.
    inits = [target_guided_init(X[i], H_init, sched, rngs[i], steps[0]) for i in range(B)]
    step_noise = np.stack([rngs[i].standard_normal((len(pairs) + 1, n, n)) for i in range(B)])
    z = np.stack([zi for zi, _ in inits])
    z0_hat = np.stack([z0 for _, z0 in inits])
    z_T = z.copy()

    trace = []
    terminal = steps[-1]
    for k, (t, t_prev) in enumerate(pairs + [(terminal, 0)]):
        if t_prev > 0:
            z_tmp = ddim_step(z, t, t_prev, guided_eps(world, z, t, labels, gc.gamma1, sched), sched)
            z_tilde = ddim_invert_step(z_tmp, t, t_prev, labels, gc, world, sched)
        else:
            # no inversion into t = 0: the denoiser is undefined there
            z_tilde = z
        z0_t = forward_noise(z0_hat, t, step_noise[:, k], sched)
        z_tilde_p = mix_bands(z0_t, z_tilde, H_mix)
        if keep_trace:
            trace.append((t, z, z_tilde, z0_t, z_tilde_p))
        eps = guided_eps(world, z_tilde_p, t, labels, cfg.gamma_redenoise, sched)
        z = ddim_step(z_tilde_p, t, t_prev, eps, sched)
    out = z
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("manipulation produced non-finite values")

    results = []
    for i in range(B):
        tr = None
        if keep_trace:
            tr = tuple(TraceStep(t, a[i], b[i], c[i], d[i]) for t, a, b, c, d in trace)
        results.append(ManipulatedSample(out[i], int(labels[i]), X[i].copy(), z_T[i] if keep_trace else None, tr))
    return results


def manipulate_sample(x_u, y_hat: int, cfg: ManipulationConfig, world: MixtureWorld, rng: np.random.Generator, trace: bool = False) -> ManipulatedSample:
    if not 0 <= int(y_hat) < world.C:
        raise IndexError(f"label {y_hat} outside [0, {world.C})")
    x_u = np.asarray(x_u, dtype=np.float64)
    return _manipulate_batch(x_u[None], np.array([int(y_hat)]), cfg, world, [rng], trace)[0]


def sample_streams(seed: int, count: int) -> list[np.random.Generator]:
    return [stream(seed, "sample", i) for i in range(count)]


def manipulate_set(U: Sequence, C: int, cfg: ManipulationConfig, world: MixtureWorld, seed: int, trace=False) -> list[ManipulatedSample]:
    """Assign balanced labels to ``U`` (dataset order) and manipulate the kept prefix.

    Sample ``i`` uses the stream ``(seed, "sample", i)``, so results do not
    depend on batching.  ``trace`` is a flag or the number of leading
    samples whose trajectories are kept.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.size == 0:
        assign_labels(0, C)
        return []
    labels = assign_labels(U.shape[0], C)
    if labels.size == 0:
        return []
    limit = labels.size if trace is True else int(trace)
    rngs = sample_streams(seed, labels.size)
    out: list[ManipulatedSample] = []
    for lo in range(0, labels.size, CHUNK):
        hi = min(lo + CHUNK, labels.size)
        out.extend(_manipulate_batch(U[lo:hi], labels[lo:hi], cfg, world, rngs[lo:hi], lo < limit))
    for i in range(limit, min(len(out), -(-limit // CHUNK) * CHUNK)):
        out[i] = replace(out[i], z_T=None, trace=None)
    return out
