import math

import numpy as np
import pytest
from sklearn.base import clone

from lrdcp._validation import DomainError
from lrdcp.calibrate import mc_critical_values
from lrdcp.changepoint import ChangePointTest, decide, run_test
from lrdcp.estimators import estimate_scale, local_whittle
from lrdcp.sim import GaussianModel, simulate
from lrdcp.stats import StatisticKind, compute_raw, normalization_power


@pytest.fixture(scope="module")
def series():
    y = simulate(GaussianModel.fgn(0.7), 60, 77)
    return y + 2.0 * (np.arange(60) >= 30)


@pytest.mark.parametrize("kind", list(StatisticKind))
def test_report_invariants(kind, series, small_calibrator):
    r = run_test(series, kind, 0.05, 0.7, small_calibrator)
    assert r.reject == (r.raw_value > r.raw_critical_value)
    assert r.reject == (r.normalized_value > r.critical_value)
    assert r.raw_critical_value == small_calibrator.critical_value(kind, 60, 0.7, 0.05)
    assert r.hurst_mode == "known" and r.hurst_used == 0.7 and r.hurst_estimate is None
    assert r.normalization.value == pytest.approx(60**0.7)
    assert r.to_dict()["kind"] == kind.value


def test_large_shift_detected_at_true_location(series, small_calibrator):
    r = run_test(series, "cvm", 0.05, 0.7, small_calibrator)
    assert r.reject and abs(r.k_hat - 30) <= 3


def test_estimated_hurst_modes(series, small_calibrator):
    w = run_test(series, "ks", 0.05, "whittle", small_calibrator)
    assert w.hurst_mode == "whittle" and w.hurst_used == local_whittle(series).value
    assert w.raw_critical_value == small_calibrator.interpolated_critical_value("ks", 60, w.hurst_used, 0.05)
    s = run_test(series, "ks", 0.05, "split", small_calibrator)
    assert s.hurst_mode == "split" and s.hurst_estimate["split_k"] == s.k_hat
    # a precomputed estimate is used as given
    again = run_test(series, "ks", 0.05, local_whittle(series), small_calibrator)
    assert again.hurst_used == w.hurst_used and again.reject == w.reject


def test_table_takes_precedence(series, small_calibrator):
    table = mc_critical_values("wilcoxon", 60, 0.7, [0.05], J=100, seed=1)
    r = run_test(series, "wilcoxon", 0.05, 0.7, small_calibrator, table=table)
    assert r.raw_critical_value == table.get("wilcoxon", 60, 0.7, 0.05)


@pytest.mark.parametrize("kind", ["cvm", "ks", "cusum"])
def test_estimated_scale_rescales_critical_value(kind, series, small_calibrator):
    base = run_test(series, kind, 0.05, 0.7, small_calibrator)
    est = run_test(series, kind, 0.05, 0.7, small_calibrator, scale="estimated")
    se = estimate_scale(series, 0.7, standardize=kind != "cusum")
    assert not se.floored
    p = normalization_power(kind)
    assert est.raw_critical_value == pytest.approx(base.raw_critical_value * (se.d_hat_n / 60**0.7) ** p, rel=1e-12)
    assert est.normalization.value == pytest.approx(se.d_hat_n)
    assert est.reject == (est.normalized_value > est.critical_value)
    assert est.scale_estimate["C_hat"] == se.C_hat


def test_floored_scale_keeps_fgn_normalization(small_calibrator):
    y = np.tile([1.0, -1.0], 30) + 0.01 * np.arange(60)
    se = estimate_scale(y, 0.7)
    assert se.floored
    base = run_test(y, "ks", 0.05, 0.7, small_calibrator)
    est = run_test(y, "ks", 0.05, 0.7, small_calibrator, scale="estimated")
    assert est.raw_critical_value == base.raw_critical_value
    assert est.normalization.value == pytest.approx(60**0.7)


def test_decide_matches_run_test(series, small_calibrator):
    y = np.asarray(series)
    a = decide(y, compute_raw(y, "cvm"), 0.05, 0.7, small_calibrator)
    assert a == run_test(y, "cvm", 0.05, 0.7, small_calibrator)


def test_errors(series, small_calibrator):
    with pytest.raises(ValueError):
        run_test(series, "cvm", 0.05, "ols", small_calibrator)
    with pytest.raises(ValueError):
        run_test(series, "cvm", 0.05, 0.7, small_calibrator, scale="robust")
    with pytest.raises(ValueError):
        run_test(series, "cvm", 1.5, 0.7, small_calibrator)
    with pytest.raises(DomainError):
        run_test(series, "cvm", 0.05, 0.5, small_calibrator, scale="estimated")
    with pytest.raises(ValueError):
        run_test(np.arange(4.0), "cvm", 0.05, 0.7, small_calibrator)


def test_sklearn_wrapper(series, small_calibrator):
    est = ChangePointTest(statistic="ks", hurst=0.7, J=200, random_state=11)
    params = est.get_params()
    assert params["statistic"] == "ks" and params["J"] == 200
    twin = clone(est)
    assert twin.get_params() == params and not hasattr(twin, "report_")
    est.calibrator_ = small_calibrator
    labels = est.fit_predict(series)
    assert est.reject_ and labels.shape == (60,)
    assert np.all(labels[: est.k_hat_] == 0) and np.all(labels[est.k_hat_ :] == 1)
    assert np.array_equal(est.predict(series), labels)
    assert est.score(series) == pytest.approx(est.report_.normalized_value / est.report_.critical_value)
    assert est.score(series) > 1.0


def test_sklearn_predict_requires_fit(series):
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        ChangePointTest().predict(series)


def test_wrapper_no_change_predicts_zeros(small_calibrator):
    y = np.full(60, 1.0) + 1e-3 * np.sin(np.arange(60))
    est = ChangePointTest(statistic="cusum", hurst=0.7)
    est.calibrator_ = small_calibrator
    labels = est.fit_predict(y)
    assert not est.reject_ and labels.sum() == 0
    assert math.isfinite(est.score(y))
