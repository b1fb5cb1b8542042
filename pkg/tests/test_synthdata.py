import numpy as np
import pytest

from dptm.errors import ConfigError, SpecificationError
from dptm.oracle import bayes_class_probs
from dptm.synthdata import (
    BenchmarkSpec,
    audit_bands,
    build_world,
    class_frequencies,
    class_pattern,
    domain_field,
)


def dft_power(grid):
    """Power spectrum from an explicit DFT matrix, independent of np.fft."""
    n = grid.shape[0]
    k = np.arange(n)
    M = np.exp(-2j * np.pi * np.outer(k, k) / n)
    return np.abs(M @ grid @ M.T) ** 2


def radius(n):
    f = np.minimum(np.arange(n), n - np.arange(n))
    return np.hypot(f[:, None], f[None, :])


@pytest.fixture(scope="module")
def default_bench():
    spec = BenchmarkSpec()
    return (spec,) + build_world(spec)


def test_defaults():
    spec = BenchmarkSpec()
    assert (spec.n, spec.C, spec.samples_per_class_per_domain, spec.sigma_data) == (16, 4, 400, 0.3)
    assert spec.rho_default == 2.0


@pytest.mark.parametrize("spec", [BenchmarkSpec(), BenchmarkSpec(n=32, C=6, class_frequency=8.0), BenchmarkSpec(n=24, C=3, class_frequency=6.0)])
def test_spectral_audit(spec):
    rho = spec.rho_default
    R = radius(spec.n)
    for c in range(spec.C):
        P = dft_power(class_pattern(spec, c))
        assert P[R <= rho].sum() < 1e-20 * P.sum()
    for d in range(2):
        P = dft_power(domain_field(spec, d))
        assert P[R >= rho].sum() < 1e-20 * P.sum()


def test_class_wave_vectors_distinct():
    ks = class_frequencies(BenchmarkSpec())
    assert len({min(k, (-k[0], -k[1])) for k in ks}) == 4


def test_low_frequency_grating_rejected():
    with pytest.raises(SpecificationError):
        audit_bands(BenchmarkSpec(class_frequency=1.0))
    with pytest.raises(SpecificationError):
        build_world(BenchmarkSpec(class_frequency=1.0))


def test_field_outside_small_cutoff_rejected():
    # n = 8 puts the cutoff at 1, below the field's diagonal harmonic
    with pytest.raises(SpecificationError, match="domain"):
        audit_bands(BenchmarkSpec(n=8, C=2, class_frequency=2.5))


def test_colliding_classes_rejected():
    with pytest.raises(SpecificationError):
        audit_bands(BenchmarkSpec(C=12, class_frequency=3.0))


def test_spec_validation():
    with pytest.raises(ConfigError, match="n"):
        BenchmarkSpec(n=7)
    with pytest.raises(ConfigError, match="class_amplitudes"):
        BenchmarkSpec(class_amplitudes=(1.0, 2.0))


def test_world_structure(default_bench):
    spec, world, source, target = default_bench
    assert world.means.shape == (4, 2, 16, 16)
    np.testing.assert_allclose(world.weights, 1 / 8)
    for c in range(4):
        for d in range(2):
            np.testing.assert_allclose(world.means[c, d], class_pattern(spec, c) + domain_field(spec, d))
    assert len(source) == len(target) == 1600
    assert source.domain == 0 and target.domain == 1
    assert np.array_equal(np.bincount(source.y), [400] * 4)
    assert np.array_equal(np.bincount(target.y), [400] * 4)


def test_samples_follow_their_means(default_bench):
    spec, world, source, target = default_bench
    for ds in (source, target):
        resid = ds.X - world.means[ds.y, ds.domain]
        assert abs(resid.std() - spec.sigma_data) < 0.01
        assert abs(resid.mean()) < 0.01


def test_bayes_accuracy_within_each_domain(default_bench):
    _, world, source, target = default_bench
    for ds in (source, target):
        acc = np.mean(np.argmax(bayes_class_probs(world, ds.X), axis=1) == ds.y)
        assert acc > 0.99


def test_zero_field_removes_shift():
    spec = BenchmarkSpec(field_amplitude=0.0, samples_per_class_per_domain=50)
    world, source, target = build_world(spec)
    np.testing.assert_array_equal(world.means[:, 0], world.means[:, 1])
    # same means and noise level: the pooled moments agree up to sampling error
    assert abs(source.X.mean() - target.X.mean()) < 0.01
    assert abs(source.X.std() - target.X.std()) < 0.01


def test_reproducible():
    spec = BenchmarkSpec(samples_per_class_per_domain=20, seed=5)
    a, b = build_world(spec), build_world(spec)
    assert np.array_equal(a[1].X, b[1].X) and np.array_equal(a[2].y, b[2].y)
    c = build_world(BenchmarkSpec(samples_per_class_per_domain=20, seed=6))
    assert not np.array_equal(a[1].X, c[1].X)
