"""Binary low-pass masks and FFT band splitting/mixing on square grids.

All operations act on the last two axes, so a stack of grids ``(B, n, n)``
is processed in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError


def radial_frequency(n: int) -> np.ndarray:
    """Distance of every FFT bin from DC, in bins, using signed frequencies."""
    k = np.fft.fftfreq(n, d=1.0 / n)
    return np.hypot(k[:, None], k[None, :])


def max_radius(n: int) -> float:
    return n * np.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class FrequencyMask:
    """Low-pass mask in unshifted FFT layout: ``mask[k] = 1`` iff ``|k| <= rho``.

    A negative ``rho`` gives the empty low band (``H == 0``); any
    ``rho >= n*sqrt(2)/2`` gives the all-pass mask.
    """

    n: int
    rho: float
    mask: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def from_radius(cls, n: int, rho: float) -> FrequencyMask:
        if n < 2 or n % 2:
            raise ConfigError(f"grid side must be even and >= 2, got {n}", "n")
        if np.isnan(rho):
            raise ConfigError(f"cutoff must be a number, got {rho}", "rho")
        mask = (radial_frequency(n) <= rho).astype(np.float64)
        mask.setflags(write=False)
        return cls(int(n), float(rho), mask)

    @classmethod
    def all_pass(cls, n: int) -> FrequencyMask:
        return cls.from_radius(n, np.inf)

    @classmethod
    def empty(cls, n: int) -> FrequencyMask:
        return cls.from_radius(n, -1.0)

    @property
    def high(self) -> np.ndarray:
        return 1.0 - self.mask


def _check(x, H: FrequencyMask) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-2:] != (H.n, H.n):
        raise DimensionError(f"grid shape {x.shape[-2:]} does not match mask side {H.n}")
    return x


def spectrum(x) -> np.ndarray:
    return np.fft.fft2(np.asarray(x, dtype=np.float64), axes=(-2, -1))


def to_grid(F) -> np.ndarray:
    # Masks are conjugate-symmetric, so the imaginary part is round-off only.
    return np.fft.ifft2(F, axes=(-2, -1)).real


def low_band(x, H: FrequencyMask) -> np.ndarray:
    x = _check(x, H)
    return to_grid(spectrum(x) * H.mask)


def high_band(x, H: FrequencyMask) -> np.ndarray:
    x = _check(x, H)
    return to_grid(spectrum(x) * H.high)


def mix_bands(low_source, high_source, H: FrequencyMask) -> np.ndarray:
    """Grid whose spectrum is ``H*FFT(low_source) + (1-H)*FFT(high_source)``."""
    a = _check(low_source, H)
    b = _check(high_source, H)
    if a.shape != b.shape:
        raise DimensionError(f"low source {a.shape} and high source {b.shape} differ")
    return to_grid(spectrum(a) * H.mask + spectrum(b) * H.high)
