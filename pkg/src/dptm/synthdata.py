"""Synthetic two-domain benchmark with band-separated semantics.

Class identity is carried by sinusoidal gratings whose spectra sit strictly
outside the default cutoff; domain identity is a smooth low-harmonic offset
strictly inside it.  Class gratings have unequal amplitudes, so the source
classifier needs unequal effective biases, which a linear model partly stores
along the source domain field.  Moving to the target field disturbs those
biases, and that is the domain shift.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, SpecificationError
from .freq import radial_frequency
from .oracle import MixtureWorld
from .rng import stream


@dataclass(frozen=True)
class BenchmarkSpec:
    n: int = 16
    C: int = 4
    samples_per_class_per_domain: int = 400
    sigma_data: float = 0.3
    class_frequency: float = 4.0  # grating radius in bins
    class_amplitudes: Optional[tuple] = None  # None -> 0.35 * 0.6**c
    field_amplitude: float = 0.4
    domain_signs: tuple = (1.0, -1.0)  # source, target
    seed: int = 0

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ConfigError("grid side must be even and >= 4", "n")
        if self.C < 1:
            raise ConfigError("need at least one class", "C")
        if self.samples_per_class_per_domain < 1:
            raise ConfigError("must be positive", "samples_per_class_per_domain")
        if self.sigma_data < 0:
            raise ConfigError("must be nonnegative", "sigma_data")
        if len(self.domain_signs) != 2:
            raise ConfigError("exactly two domains (source, target)", "domain_signs")
        if self.class_amplitudes is not None:
            object.__setattr__(self, "class_amplitudes", tuple(float(a) for a in self.class_amplitudes))
            if len(self.class_amplitudes) != self.C:
                raise ConfigError(f"need {self.C} amplitudes", "class_amplitudes")
        object.__setattr__(self, "domain_signs", tuple(float(s) for s in self.domain_signs))

    @property
    def rho_default(self) -> float:
        return self.n / 8

    def amplitudes(self) -> np.ndarray:
        if self.class_amplitudes is None:
            return 0.35 * 0.6 ** np.arange(self.C)
        return np.asarray(self.class_amplitudes, dtype=np.float64)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["class_amplitudes"] = None if self.class_amplitudes is None else list(self.class_amplitudes)
        d["domain_signs"] = list(self.domain_signs)
        return d


@dataclass(frozen=True)
class Dataset:
    """Grids with ground-truth labels; labels are for evaluation and source training only."""

    X: np.ndarray = field(repr=False)  # (N, n, n)
    y: np.ndarray = field(repr=False)  # (N,)
    domain: int = 0

    def __len__(self):
        return self.X.shape[0]


def _grid_coords(n: int):
    return np.meshgrid(np.arange(n), np.arange(n), indexing="ij")


def class_frequencies(spec: BenchmarkSpec) -> list[tuple[int, int]]:
    """One integer wave vector per class, orientations evenly spread over [0, pi)."""
    out = []
    for c in range(spec.C):
        theta = np.pi * c / spec.C
        k = (int(round(spec.class_frequency * np.cos(theta))), int(round(spec.class_frequency * np.sin(theta))))
        out.append(k)
    return out


def class_pattern(spec: BenchmarkSpec, c: int) -> np.ndarray:
    kx, ky = class_frequencies(spec)[c]
    xx, yy = _grid_coords(spec.n)
    return spec.amplitudes()[c] * np.cos(2 * np.pi * (kx * xx + ky * yy) / spec.n)


def domain_field(spec: BenchmarkSpec, d: int) -> np.ndarray:
    xx, yy = _grid_coords(spec.n)
    n = spec.n
    shape = 0.7 + np.cos(2 * np.pi * xx / n) + 0.5 * np.sin(2 * np.pi * (xx + yy) / n)
    return spec.field_amplitude * spec.domain_signs[d] * shape


def band_energy(grid: np.ndarray, rho: float) -> tuple[float, float]:
    """(energy with radius <= rho, energy with radius > rho) of ``grid``'s spectrum."""
    F = np.abs(np.fft.fft2(grid)) ** 2
    inside = radial_frequency(grid.shape[0]) <= rho
    return float(F[inside].sum()), float(F[~inside].sum())


def audit_bands(spec: BenchmarkSpec, rel_tol: float = 1e-20) -> None:
    """Raise if any class pattern leaks into, or any domain field out of, the low band."""
    freqs = class_frequencies(spec)
    keyed = {min(k, (-k[0], -k[1])) for k in freqs}
    if len(keyed) != spec.C:
        raise SpecificationError(f"class wave vectors collide: {freqs}")
    rho = spec.rho_default
    for c in range(spec.C):
        low, high = band_energy(class_pattern(spec, c), rho)
        if low > rel_tol * max(low + high, 1e-300) or np.hypot(*freqs[c]) <= rho:
            raise SpecificationError(f"class {c} pattern has energy inside radius {rho}")
    for d in range(2):
        f = domain_field(spec, d)
        # strictly inside: nothing at radius >= rho
        F = np.abs(np.fft.fft2(f)) ** 2
        outside = radial_frequency(spec.n) >= rho
        if F[outside].sum() > rel_tol * max(F.sum(), 1e-300):
            raise SpecificationError(f"domain {d} field has energy at radius >= {rho}")


def build_world(spec: BenchmarkSpec, rng: Optional[np.random.Generator] = None):
    """Return ``(world, source, target)`` with ``mu[c, d] = pattern(c) + field(d)``."""
    audit_bands(spec)
    means = np.stack(
        [np.stack([class_pattern(spec, c) + domain_field(spec, d) for d in range(2)]) for c in range(spec.C)]
    )
    world = MixtureWorld.uniform(means, spec.sigma_data)
    rng = stream(spec.seed, "data") if rng is None else rng
    datasets = []
    m = spec.samples_per_class_per_domain
    for d in range(2):
        y = np.repeat(np.arange(spec.C), m)
        X = means[y, d] + spec.sigma_data * rng.standard_normal((y.size, spec.n, spec.n))
        order = rng.permutation(y.size)
        datasets.append(Dataset(X[order], y[order], d))
    return world, datasets[0], datasets[1]
