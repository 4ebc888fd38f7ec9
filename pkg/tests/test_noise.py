import math

import numpy as np
import pytest

from aeris import NoiseModel, ou_trajectory
from aeris.noise import ou_path


def test_zero_sigma_gives_constant_shift():
    path = ou_trajectory(NoiseModel(sigma=0.0, amp_shift=0.01), 1e-3)
    t = np.linspace(0, 1e-3, 50)
    np.testing.assert_array_equal(path(t), np.full(50, 0.01))


def test_seed_determinism():
    n = NoiseModel(sigma=0.02, corr_time=5e-4, seed=11)
    a, b = ou_trajectory(n, 2e-3), ou_trajectory(n, 2e-3)
    np.testing.assert_array_equal(a.values, b.values)
    c = ou_trajectory(NoiseModel(sigma=0.02, corr_time=5e-4, seed=12), 2e-3)
    assert not np.array_equal(a.values, c.values)


def test_piecewise_constant_hold():
    path = ou_trajectory(NoiseModel(sigma=0.01, step=1e-6, amp_shift=0.5, seed=3), 10e-6)
    assert len(path.values) == 10
    assert path(0.0) == path(0.99e-6) == path.values[0] + 0.5
    assert path(1e-6) == path.values[1] + 0.5
    assert path(1.0) == path.values[-1] + 0.5


def test_invalid_models():
    with pytest.raises(ValueError):
        NoiseModel(sigma=-0.1)
    with pytest.raises(ValueError):
        NoiseModel(corr_time=0.0)
    with pytest.raises(ValueError):
        ou_trajectory(NoiseModel(sigma=0.01), 0.0)


def test_ou_path_matches_explicit_recursion():
    rng1, rng2 = np.random.default_rng(5), np.random.default_rng(5)
    x = ou_path(0.01, 1e-3, 1e-6, 200, rng1)
    z = rng2.standard_normal(200)
    a = math.exp(-1e-3)
    ref = np.empty(200)
    ref[0] = 0.01 * z[0]
    for i in range(1, 200):
        ref[i] = a * ref[i - 1] + 0.01 * math.sqrt(1 - a * a) * z[i]
    np.testing.assert_allclose(x, ref, rtol=1e-12, atol=1e-18)


def test_long_path_std_mild_parameters():
    path = ou_trajectory(NoiseModel(sigma=0.0024, corr_time=1e-3, step=1e-6, seed=2024), 1.0)
    assert len(path.values) == 10**6
    assert np.std(path.values) == pytest.approx(0.0024, rel=0.05)
