import json
import math
import os

import numpy as np
import pytest
from scipy.stats import kstwobign

from lrdcp._validation import DomainError
from lrdcp.calibrate import (
    CriticalValueTable,
    NullCalibrator,
    UnsupportedOrderError,
    _limit_paths,
    asymptotic_critical_value,
    asymptotic_power,
    atomic_write_text,
    empirical_quantile,
    limit_functional,
    mc_critical_values,
    psi_tau,
)
from lrdcp.changepoint import run_test
from lrdcp.sim import GaussianModel, simulate_many
from lrdcp.stats import StatisticKind, compute_raw
from lrdcp.subordinate import Subordinator


def test_psi_tau_examples():
    assert psi_tau(0.5, 0.5) == 0.25
    assert psi_tau(0.0, 0.3) == 0.0 and psi_tau(1.0, 0.3) == 0.0
    assert psi_tau(0.2, 0.5) == pytest.approx(0.10)
    assert psi_tau(0.8, 0.25) == pytest.approx(0.25 * 0.2)
    with pytest.raises(DomainError):
        psi_tau(0.5, 1.0)


def test_empirical_quantile_order_statistic():
    v = np.arange(1.0, 101.0)[::-1]
    assert empirical_quantile(v, 0.05) == 95.0
    assert empirical_quantile(v, 0.01) == 99.0
    assert empirical_quantile(np.arange(1.0, 1001.0), 0.05) == 950.0


def test_mc_table_monotone_and_deterministic():
    a = mc_critical_values("ks", 100, 0.7, [0.01, 0.05, 0.1], J=200, seed=7)
    b = mc_critical_values("ks", 100, 0.7, [0.05], J=200, seed=7)
    assert a.get("ks", 100, 0.7, 0.01) > a.get("ks", 100, 0.7, 0.05) > a.get("ks", 100, 0.7, 0.1)
    assert a.get("ks", 100, 0.7, 0.05) == b.get("ks", 100, 0.7, 0.05, J=200)
    c = mc_critical_values("ks", 100, 0.7, [0.05], J=200, seed=8)
    assert c.get("ks", 100, 0.7, 0.05) != b.get("ks", 100, 0.7, 0.05)
    with pytest.raises(ValueError):
        mc_critical_values("ks", 100, 0.7, [0.05], J=50)


def test_mc_size_on_fresh_null_series():
    J, alpha = 1000, 0.05
    table = mc_critical_values("cvm", 50, 0.7, [alpha], J=J, seed=21)
    cv = table.get("cvm", 50, 0.7, alpha)
    X = simulate_many(GaussianModel.fgn(0.7), 50, 22, range(J))
    rate = np.mean([compute_raw(x, "cvm").raw_value > cv for x in X])
    assert abs(rate - alpha) <= 2 * math.sqrt(alpha * (1 - alpha) / J)


def test_quantile_consistency_when_doubling_J():
    small = NullCalibrator(300, 31, cache_dir=False)
    large = NullCalibrator(600, 31, cache_dir=False)
    v = large.null_sample(80, 0.7)[StatisticKind.KS]
    s = math.sqrt(0.05 * 0.95 / 300)
    # order-statistic standard error from the spacing around the quantile
    se = (empirical_quantile(v, 0.05 - s) - empirical_quantile(v, 0.05 + s)) / 2
    diff = abs(small.critical_value("ks", 80, 0.7, 0.05) - large.critical_value("ks", 80, 0.7, 0.05))
    assert diff < 3 * se


def test_interpolated_critical_value(small_calibrator):
    cal = small_calibrator
    on = cal.interpolated_critical_value("cvm", 60, 0.7, 0.05)
    assert on == cal.critical_value("cvm", 60, 0.7, 0.05)
    mid = cal.interpolated_critical_value("cvm", 60, 0.705, 0.05)
    lo, hi = cal.critical_value("cvm", 60, 0.70, 0.05), cal.critical_value("cvm", 60, 0.71, 0.05)
    assert mid == pytest.approx(0.5 * (lo + hi), rel=1e-9)
    with pytest.raises(DomainError):
        cal.interpolated_critical_value("cvm", 60, 0.3, 0.05)


def test_disk_cache_roundtrip(tmp_path):
    a = NullCalibrator(100, 5, cache_dir=tmp_path)
    va = a.critical_value("wilcoxon", 40, 0.6, 0.05)
    assert len(list(tmp_path.glob("*.npz"))) == 1
    b = NullCalibrator(100, 5, cache_dir=tmp_path)
    assert b.critical_value("wilcoxon", 40, 0.6, 0.05) == va


def test_table_json_roundtrip(tmp_path):
    table = mc_critical_values(["ks", "cvm"], 60, 0.8, [0.05, 0.01], J=100, seed=3)
    table.created = None
    path = tmp_path / "t.json"
    table.save(path)
    back = CriticalValueTable.load(path)
    assert back.entries == table.entries and back.master_seed == 3 and back.created is None
    doc = json.loads(path.read_text())
    assert set(doc["entries"][0]) == {"stat", "n", "H", "alpha", "J", "value"}
    assert back.to_json() == table.to_json()


def test_table_lookup_interpolates():
    t = CriticalValueTable()
    t.add("ks", 100, 0.6, 0.05, 300, 10.0)
    t.add("ks", 100, 0.7, 0.05, 300, 20.0)
    assert t.lookup("ks", 100, 0.65, 0.05) == pytest.approx(15.0)
    with pytest.raises(DomainError):
        t.lookup("ks", 100, 0.75, 0.05)
    with pytest.raises(KeyError):
        t.lookup("cvm", 100, 0.65, 0.05)


def test_atomic_write_leaves_original_on_failure(tmp_path, monkeypatch):
    path = tmp_path / "out.json"
    atomic_write_text(path, "old")

    def boom(src, dst):
        raise OSError("interrupted")

    monkeypatch.setattr(os, "replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(path, "new")
    assert path.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.json"]


@pytest.mark.parametrize("kind", ["ks", "cvm", "wilcoxon"])
def test_raw_scale_decision_invariance(kind, small_calibrator):
    X = simulate_many(GaussianModel.fgn(0.7), 60, 41, range(20))
    for i, x in enumerate(X):
        y = x + (1.0 if i % 2 else 0.0) * (np.arange(60) >= 30)
        a = run_test(y, kind, 0.05, 0.7, small_calibrator)
        b = run_test(np.exp(y), kind, 0.05, 0.7, small_calibrator)
        assert a.reject == b.reject and a.raw_value == b.raw_value


def test_bridge_endpoints_zero():
    for m, H in ((1, 0.7), (2, 0.8)):
        P = _limit_paths(m, H, 64, 1, range(4), (0,))
        assert np.all(P[:, 0] == 0.0) and np.all(P[:, -1] == 0.0)


def test_kolmogorov_oracle():
    sample = limit_functional(1, 0.5, 2048, 10_000, seed=17)
    assert np.all(sample.values >= 0)
    p = np.mean(sample.values > 1.358)
    assert p == pytest.approx(kstwobign.sf(1.358), abs=0.01)
    assert sample.quantile(0.95) == pytest.approx(kstwobign.ppf(0.95), abs=0.03)


@pytest.mark.parametrize("H", [0.6, 0.8])
def test_grid_refinement(H):
    P = np.vstack([_limit_paths(1, H, 2048, 5, range(s, s + 500), (7,)) for s in range(0, 2000, 500)])
    fine = empirical_quantile(np.abs(P).max(axis=1), 0.05)
    # the same paths read off the coarser grid of 512 intervals
    coarse = empirical_quantile(np.abs(P[:, ::4]).max(axis=1), 0.05)
    assert 0.0 <= fine - coarse < 0.01


@pytest.mark.parametrize("m,reps,rel", [(1, 4000, 0.1), (2, 600, 0.25)])
def test_bridge_midpoint_variance(m, reps, rel):
    # unit-variance self-similar process: Var(Z(1/2) - Z(1)/2) = 2^{-2H} - 1/4
    H = 0.8
    P = _limit_paths(m, H, 64, 3, range(reps), (0,))
    assert np.var(P[:, 32]) == pytest.approx(2 ** (-2 * H) - 0.25, rel=rel)


def test_power_monotone_in_shift():
    q = limit_functional(1, 0.7, 1024, 10_000, seed=2).quantile(0.95)
    powers = [np.mean(limit_functional(1, 0.7, 1024, 10_000, shift=(C, 0.5), seed=3).values > q) for C in (0, 1, 2)]
    assert powers[0] < powers[1] < powers[2]
    assert powers[0] == pytest.approx(0.05, abs=2 * math.sqrt(0.05 * 0.95 / 10_000) * math.sqrt(2))


def test_asymptotic_power_limits():
    assert asymptotic_power(0.0, 0.5, 0.7, 0.05, 10_000) == pytest.approx(0.05, abs=2 * math.sqrt(0.05 * 0.95 / 10_000) * math.sqrt(2))
    assert asymptotic_power(50.0, 0.5, 0.7, 0.05, 2000, grid=512) >= 0.999
    with pytest.raises(DomainError):
        asymptotic_power(-1.0, 0.5, 0.7)


def test_asymptotic_power_against_brownian_bridge_oracle():
    rng = np.random.default_rng(99)
    grid, reps = 4096, 10_000
    t = np.arange(1, grid + 1) / grid
    drift = 2.0 * np.where(t <= 0.5, t * 0.5, 0.5 * (1 - t))
    q = kstwobign.ppf(0.95)
    hits = 0
    for _ in range(reps // 500):
        W = np.cumsum(rng.normal(size=(500, grid)), axis=1) / math.sqrt(grid)
        B = W - t * W[:, -1:]
        hits += int(np.sum(np.abs(B + drift).max(axis=1) > q))
    assert asymptotic_power(2.0, 0.5, 0.5, 0.05, reps) == pytest.approx(hits / reps, abs=0.02)


class _RankThree(Subordinator):
    """Stub whose indicator class reports Hermite rank 3."""

    name = "rank3"

    def __call__(self, s):
        return np.asarray(s, dtype=np.float64)

    def region(self, x):
        return [(-math.inf, x)]


def test_unsupported_order(monkeypatch):
    import lrdcp.calibrate as cal

    monkeypatch.setattr(cal, "hermite_rank", lambda G, *a, **k: type("R", (), {"rank": 3})())
    with pytest.raises(UnsupportedOrderError):
        limit_functional(3, 0.7, 64, 10)
    with pytest.raises(UnsupportedOrderError):
        asymptotic_critical_value("ks", 100, GaussianModel.fgn(0.9), G=_RankThree())


def test_asymptotic_critical_value_identity_ks():
    n, H = 200, 0.7
    q = limit_functional(1, H, 512, 2000, seed=4).quantile(0.95)
    cv = asymptotic_critical_value("ks", n, GaussianModel.fgn(H), reps=2000, grid=512, seed=4)
    # sup_x |J_1(x)| = phi(0) for the identity transform
    assert cv == pytest.approx(q * n**H / math.sqrt(2 * math.pi), rel=1e-4)
