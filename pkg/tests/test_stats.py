import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lrdcp.stats import (
    StatisticKind,
    changepoint_estimate,
    compute_many,
    compute_raw,
    cusum_raw,
    cvm_raw,
    ks_raw,
    max_ranks,
    normalization_power,
    normalize,
    wilcoxon_raw,
)
from lrdcp.verify import brute_force_statistics

RANK_KINDS = (StatisticKind.KS, StatisticKind.CVM, StatisticKind.WILCOXON)

series_st = arrays(
    np.float64,
    st.integers(2, 14),
    elements=st.floats(-5, 5, allow_nan=False, allow_subnormal=False).map(lambda v: round(v, 1)),
)


def _brute_cusum(y):
    n = len(y)
    return max(abs(sum(y[:k]) - k / n * sum(y)) for k in range(1, n))


def test_two_point_examples():
    y = [1.0, 2.0]
    ks, cvm, wil = ks_raw(y), cvm_raw(y), wilcoxon_raw(y)
    assert (ks.raw_value, ks.argmax_k) == (0.5, 1)
    assert (cvm.raw_value, cvm.argmax_k) == (0.125, 1)
    assert wil.raw_value == 0.5
    for kind in StatisticKind:
        assert changepoint_estimate(y, kind) == 1


def test_cusum_example():
    r = cusum_raw([0.0, 0.0, 1.0, 1.0])
    assert r.raw_value == 1.0 and r.argmax_k == 2
    assert changepoint_estimate([0, 0, 0, 5, 5, 5], "cusum") == 3


@pytest.mark.parametrize("kind", list(StatisticKind))
def test_constant_series(kind):
    y = np.full(7, 3.2)
    r = compute_raw(y, kind)
    if kind is StatisticKind.WILCOXON:
        # ties count as 1{Y_i <= Y_j} = 1, so each pair contributes 1/2
        k = np.arange(1, 7)
        assert np.array_equal(r.profile, k * (7 - k) / 2)
        assert r.raw_value == 3 * 4 / 2 and r.argmax_k == 3
    else:
        assert r.raw_value == 0.0 and r.argmax_k == 1


def test_raw_value_matches_profile():
    y = np.random.default_rng(3).normal(size=50)
    for kind in StatisticKind:
        r = compute_raw(y, kind)
        assert r.raw_value == r.profile[r.argmax_k - 1]
        assert r.argmax_k == int(np.flatnonzero(r.profile == r.profile.max())[0]) + 1
        assert r.profile.shape == (49,)


def test_max_ranks_with_ties():
    assert max_ranks(np.array([3.0, 1.0, 3.0, 2.0])).tolist() == [4, 1, 4, 2]


def test_brute_force_equivalence_random(rng):
    for _ in range(100):
        n = int(rng.integers(2, 13))
        y = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        oracle = brute_force_statistics(y)
        for kind in RANK_KINDS:
            assert compute_raw(y, kind).raw_value == pytest.approx(oracle[kind], abs=1e-12)
        assert cusum_raw(y).raw_value == pytest.approx(_brute_cusum(y), abs=1e-12)


def test_exp_invariance_and_cusum_sensitivity(rng):
    y = rng.normal(size=120)
    for kind in RANK_KINDS:
        assert compute_raw(y, kind).raw_value == compute_raw(np.exp(y), kind).raw_value
    assert cusum_raw(y).raw_value != cusum_raw(np.exp(y)).raw_value


def test_cusum_shift_invariant(rng):
    y = rng.normal(size=64)
    assert cusum_raw(y + 7.0).raw_value == pytest.approx(cusum_raw(y).raw_value, abs=1e-11)


def test_compute_many_matches_single(rng):
    y = rng.normal(size=80)
    many = compute_many(y, list(StatisticKind))
    for kind in StatisticKind:
        assert many[kind].raw_value == compute_raw(y, kind).raw_value


def test_input_errors():
    with pytest.raises(ValueError):
        ks_raw([1.0])
    with pytest.raises(ValueError):
        compute_raw([1.0, 2.0], "ad")


def test_normalize_scaling():
    assert normalization_power("cvm") == 2 and normalization_power("ks") == 1
    assert normalize(8.0, "cvm", 2.0, 10) == 2.0
    assert normalize(8.0, "ks", 2.0, 10) == 4.0
    assert normalize(8.0, "wilcoxon", 2.0, 10) == 0.4


@given(series_st)
def test_property_brute_force(y):
    oracle = brute_force_statistics(y)
    for kind in RANK_KINDS:
        assert compute_raw(y, kind).raw_value == pytest.approx(oracle[kind], abs=1e-12)


@given(series_st)
def test_property_reversal_symmetry(y):
    # the <= tie convention is not reversal symmetric for Wilcoxon
    kinds = list(StatisticKind) if len(np.unique(y)) == len(y) else [StatisticKind.KS, StatisticKind.CVM, StatisticKind.CUSUM]
    for kind in kinds:
        a = compute_raw(y, kind).raw_value
        b = compute_raw(y[::-1].copy(), kind).raw_value
        assert a == pytest.approx(b, abs=1e-9)


@given(series_st)
def test_property_nonnegative_and_cvm_zero(y):
    for kind in StatisticKind:
        assert compute_raw(y, kind).raw_value >= 0.0
    assert (cvm_raw(y).raw_value == 0.0) == bool(np.all(y == y[0]))


@given(series_st, st.sampled_from(list(RANK_KINDS)))
def test_property_monotone_invariance(y, kind):
    g = np.arctan(3.0 * y) + y**3
    assert compute_raw(y, kind).raw_value == compute_raw(g, kind).raw_value


@given(series_st)
def test_property_bridge_vanishes_at_n(y):
    n = len(y)
    at_n = [np.sum(y <= x) - n / n * np.sum(y <= x) for x in y]
    assert max(abs(v) for v in at_n) == 0.0
    for kind in StatisticKind:
        r = compute_raw(y, kind)
        assert max(r.profile.max(), 0.0) == r.raw_value
