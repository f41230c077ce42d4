import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from lrdcp._validation import DegenerateInputError
from lrdcp.estimators import (
    HURST_FLOOR,
    LocalWhittleEstimator,
    SplitWhittleEstimator,
    estimate_scale,
    local_whittle,
    periodogram,
    scale_normalization,
    split_whittle,
    whittle_objective,
)
from lrdcp.sim import GaussianModel, fgn_autocov, simulate, simulate_many


def test_periodogram_constant_series():
    _, ords = periodogram(np.full(32, 2.5))
    assert np.allclose(ords, 0.0, atol=1e-20)


def test_periodogram_cosine_concentration():
    n = 64
    t = np.arange(1, n + 1)
    freqs, ords = periodogram(np.cos(2 * np.pi * 5 * t / n))
    assert freqs[4] == pytest.approx(2 * np.pi * 5 / n)
    assert ords[4] / ords.sum() >= 0.99
    # direct DFT at j = 5
    direct = abs(np.sum(np.cos(2 * np.pi * 5 * t / n) * np.exp(-1j * t * freqs[4]))) ** 2 / (2 * np.pi * n)
    assert ords[4] == pytest.approx(direct, rel=1e-10)


@pytest.mark.parametrize("n", [63, 64])
def test_periodogram_parseval(n, rng):
    y = rng.normal(size=n)
    _, ords = periodogram(y)
    z = y - y.mean()
    total = (2 * np.pi / n) * 2 * ords.sum()
    if n % 2 == 0:
        # the Nyquist ordinate is counted once
        total -= (2 * np.pi / n) * ords[-1]
    assert total == pytest.approx(np.dot(z, z) / n, abs=1e-10)


def test_local_whittle_mc_consistency():
    X = simulate_many(GaussianModel.fgn(0.7), 1000, 101, range(200))
    assert np.mean([local_whittle(x).value for x in X]) == pytest.approx(0.7, abs=0.03)


def test_local_whittle_iid_and_clamp():
    X = np.random.default_rng(5).normal(size=(200, 1000))
    ests = [local_whittle(x) for x in X]
    assert np.mean([e.raw_value for e in ests]) == pytest.approx(0.5, abs=0.03)
    assert min(e.value for e in ests) >= HURST_FLOOR
    assert all(e.value == max(e.raw_value, HURST_FLOOR) for e in ests)


def test_clamp_on_antipersistent_input():
    y = np.diff(np.random.default_rng(2).normal(size=1001))
    est = local_whittle(y)
    assert est.raw_value < 0.3 and est.value == HURST_FLOOR


def test_local_whittle_scale_equivariance(rng):
    y = rng.normal(size=500)
    assert local_whittle(3.7 * y).raw_value == pytest.approx(local_whittle(y).raw_value, abs=1e-12)


def test_golden_section_is_local_minimum():
    y = simulate(GaussianModel.fgn(0.75), 800, 3)
    est = local_whittle(y)
    freqs, ords = periodogram(y)
    f, o = freqs[: est.bandwidth], ords[: est.bandwidth]
    at = whittle_objective(est.raw_value, f, o)
    assert at <= whittle_objective(est.raw_value - 1e-3, f, o)
    assert at <= whittle_objective(est.raw_value + 1e-3, f, o)


def test_local_whittle_errors():
    with pytest.raises(DegenerateInputError):
        local_whittle(np.zeros(64))
    with pytest.raises(ValueError):
        local_whittle(np.ones(64) + np.arange(64), bandwidth=40)


def test_default_bandwidth():
    assert local_whittle(np.random.default_rng(0).normal(size=1000)).bandwidth == 99


def test_split_whittle_k_equals_n(rng):
    y = rng.normal(size=100)
    assert split_whittle(y, k_hat=100).value == local_whittle(y).value


def test_split_whittle_weighting_identity(rng):
    half = rng.normal(size=60)
    y = np.concatenate([half, half[::-1]])
    est = split_whittle(y, k_hat=60)
    left, right = local_whittle(y[:60]), local_whittle(y[60:])
    assert est.raw_value == pytest.approx(0.5 * left.raw_value + 0.5 * right.raw_value, abs=1e-15)
    assert est.split_k == 60 and not est.fallback


def test_split_whittle_short_segment_falls_back(rng):
    y = rng.normal(size=50)
    est = split_whittle(y, k_hat=2)
    assert est.fallback and est.value == local_whittle(y).value


def test_split_whittle_stationary_close_to_whole():
    X = simulate_many(GaussianModel.fgn(0.7), 1000, 102, range(200))
    split = np.mean([split_whittle(x).value for x in X])
    whole = np.mean([local_whittle(x).value for x in X])
    assert abs(split - whole) <= 0.05


def test_split_whittle_less_biased_under_shift():
    X = simulate_many(GaussianModel.fgn(0.7), 500, 103, range(200))
    Y = simulate_many(GaussianModel.fgn(0.7), 500, 104, range(200))
    Z = np.concatenate([X, Y + 1.0], axis=1)
    split = np.mean([split_whittle(z).value for z in Z])
    whole = np.mean([local_whittle(z).value for z in Z])
    assert abs(split - 0.7) < abs(whole - 0.7)


def test_scale_estimate_mc():
    X = simulate_many(GaussianModel.fgn(0.8), 2000, 105, range(100))
    C = np.mean([estimate_scale(x, local_whittle(x)).C_hat for x in X])
    assert C == pytest.approx(0.48, rel=0.15)


@pytest.mark.parametrize("H", [0.6, 0.7, 0.8, 0.9])
def test_scale_constant_with_exact_autocorrelation(H):
    k = np.arange(1, 201)
    C = np.mean(fgn_autocov(H, k) * k ** (2 - 2 * H))
    assert C == pytest.approx(H * (2 * H - 1), rel=0.02)


def test_scale_estimate_scaling(rng):
    y = simulate(GaussianModel.fgn(0.8), 1000, 4)
    a = estimate_scale(y, 0.8, standardize=False)
    b = estimate_scale(2.5 * y, 0.8, standardize=False)
    assert b.C_hat == pytest.approx(2.5**2 * a.C_hat, rel=1e-10)
    assert b.d_hat_n == pytest.approx(2.5 * a.d_hat_n, rel=1e-10)
    # standardized estimate is scale free
    assert estimate_scale(2.5 * y, 0.8).C_hat == pytest.approx(estimate_scale(y, 0.8).C_hat, rel=1e-10)


def test_scale_estimate_defaults_and_errors(rng):
    y = rng.normal(size=1000)
    est = estimate_scale(y, 0.7)
    assert est.K == 9 and est.C_hat >= 1e-6
    assert est.d_hat_n == pytest.approx(1000**0.7 * math.sqrt(est.C_hat / (0.7 * 0.4)))
    with pytest.raises(ValueError):
        estimate_scale(y, 0.5)
    with pytest.raises(ValueError):
        estimate_scale(y, 0.7, K=400)
    with pytest.raises(DegenerateInputError):
        estimate_scale(np.ones(50), 0.7)


def test_scale_floor_on_negative_correlation():
    y = np.tile([1.0, -1.0], 200)
    est = estimate_scale(y, 0.7, K=1, mean_correction=False)
    assert est.C_hat == 1e-6 and est.floored


@given(st.floats(0.51, 0.99), st.floats(1e-3, 5.0))
def test_property_scale_normalization_monotone_in_n(H, C):
    vals = [scale_normalization(n, H, C) for n in (10, 100, 1000, 10_000)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


def test_fgn_scale_reduces_to_n_power():
    assert scale_normalization(500, 0.7, 0.7 * 0.4) == pytest.approx(500**0.7, rel=1e-14)


def test_sklearn_estimators(rng):
    y = rng.normal(size=300)
    lw = LocalWhittleEstimator(bandwidth=20)
    assert lw.get_params() == {"bandwidth": 20}
    assert clone(lw).get_params() == {"bandwidth": 20}
    assert lw.fit(y).hurst_ == local_whittle(y, 20).value
    sw = SplitWhittleEstimator(statistic="ks").fit(y)
    labels = sw.segment_labels()
    assert labels.shape == (300,) and labels.sum() == 300 - sw.split_k_
    assert sw.hurst_ == split_whittle(y, "ks").value
