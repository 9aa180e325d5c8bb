from statistics import NormalDist

import numpy as np
import pytest

from nrpredict.rng import RNG_ALGORITHM, PortableRNG, norm_ppf


def test_quantile_matches_stdlib():
    ref = NormalDist()
    ps = np.concatenate([np.linspace(1e-9, 0.02, 200), np.linspace(0.02, 0.98, 500), 1 - np.linspace(1e-9, 0.02, 200)])
    got = norm_ppf(ps)
    want = np.array([ref.inv_cdf(float(p)) for p in ps])
    assert np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want))) < 1.5e-9


def test_quantile_scalar_and_symmetry():
    assert norm_ppf(0.5) == 0.0
    assert isinstance(norm_ppf(0.3), float)
    assert norm_ppf(0.975) == pytest.approx(1.959963985, abs=1e-8)
    assert norm_ppf(0.01) == pytest.approx(-norm_ppf(0.99), abs=1e-12)


def test_same_seed_same_stream():
    a, b = PortableRNG(42), PortableRNG(42)
    assert np.array_equal(a.raw(16), b.raw(16))
    assert a.normal() == b.normal()
    assert not np.array_equal(PortableRNG(42).raw(4), PortableRNG(43).raw(4))


def test_substreams_are_independent():
    x = PortableRNG(7, 0).raw(8)
    y = PortableRNG(7, 1).raw(8)
    assert not np.array_equal(x, y)
    assert np.array_equal(x, PortableRNG(7, 0).raw(8))


def test_uniform_ranges():
    rng = PortableRNG(1)
    u = rng.uniform(10000)
    assert u.min() >= 0.0 and u.max() < 1.0
    v = rng.open_uniform(10000)
    assert v.min() > 0.0 and v.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.02


def test_normal_moments():
    z = PortableRNG(3).normal(2.0, 0.5, size=20000)
    assert abs(z.mean() - 2.0) < 0.02
    assert abs(z.std() - 0.5) < 0.02


def test_permutation_and_subset():
    perm = PortableRNG(5).permutation(50)
    assert sorted(perm.tolist()) == list(range(50))
    assert np.array_equal(perm, PortableRNG(5).permutation(50))
    sub = PortableRNG(5).choice_subset(10, 4)
    assert len(set(sub.tolist())) == 4 and list(sub) == sorted(sub) and sub.max() < 10


def test_binomial_bounds():
    rng = PortableRNG(9)
    draws = [rng.binomial(1000, 0.3) for _ in range(200)]
    assert all(0 <= d <= 1000 for d in draws)
    assert abs(np.mean(draws) - 300) < 5
    assert rng.binomial(10, 0.0) == 0


def test_seed_range_checked():
    with pytest.raises(ValueError):
        PortableRNG(-1)
    with pytest.raises(ValueError):
        PortableRNG(2**64)
    assert RNG_ALGORITHM
