"""Invariant suites bundled for the ``verify`` command.

Each suite returns :class:`Check` records with the measured quantity and the
target it was compared with.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .calibrate import DEFAULT_SEED, asymptotic_power, limit_functional
from .estimators import estimate_scale, local_whittle
from .experiments import PHI3_MOMENT_RATIO, are_mean_variance, fstar
from .sim import GaussianModel, SeedSpec, simulate_many
from .stats import StatisticKind, compute_raw
from .subordinate import (
    Subordinator,
    hermite_coeff,
    normalization_dn,
    reduction_residual,
)

__all__ = ["Check", "SUITES", "brute_force_statistics", "run_suite"]


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    measured: object
    target: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        m = self.measured
        m = [float(v) for v in m] if isinstance(m, (list, tuple)) else (float(m) if isinstance(m, (float, np.floating)) else m)
        object.__setattr__(self, "measured", m)

    def to_dict(self) -> dict:
        return asdict(self)


def brute_force_statistics(y) -> dict:
    """Raw KS, CvM and Wilcoxon values by direct enumeration (cubic time)."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    ks = cvm = wil = 0.0
    for k in range(1, n):
        devs = [sum(y[i] <= x for i in range(k)) - k / n * sum(y[i] <= x for i in range(n)) for x in y]
        ks = max(ks, max(abs(d) for d in devs))
        cvm = max(cvm, sum(d * d for d in devs) / n)
        wil = max(wil, abs(sum((y[i] <= y[j]) - 0.5 for i in range(k) for j in range(k, n))))
    return {StatisticKind.KS: ks, StatisticKind.CVM: cvm, StatisticKind.WILCOXON: wil}


def _rng(seed, *stream):
    return SeedSpec(seed, 0, (9,) + stream).rng()


def suite_oracle(reps=200, seed=DEFAULT_SEED, **_):
    rng = _rng(seed, 1)
    worst = 0.0
    for _ in range(reps):
        n = int(rng.integers(2, 13))
        y = np.round(rng.normal(size=n), int(rng.integers(0, 3)))
        oracle = brute_force_statistics(y)
        for kind, value in oracle.items():
            worst = max(worst, abs(compute_raw(y, kind).raw_value - value))
    return [Check("oracle", "incremental equals enumeration", worst <= 1e-12, worst, "max abs diff <= 1e-12")]


def suite_invariance(reps=100, n=200, seed=DEFAULT_SEED, **_):
    X = simulate_many(GaussianModel.fgn(0.7), n, seed, range(reps), stream=(9, 2))
    same = {k: 0 for k in StatisticKind}
    for x in X:
        ex = np.exp(x)
        for kind in StatisticKind:
            same[kind] += compute_raw(x, kind).raw_value == compute_raw(ex, kind).raw_value
    out = [
        Check("invariance", f"{k.value} unchanged by exp", same[k] == reps, same[k], f"{reps} of {reps}")
        for k in (StatisticKind.KS, StatisticKind.CVM, StatisticKind.WILCOXON)
    ]
    changed = reps - same[StatisticKind.CUSUM]
    out.append(Check("invariance", "cusum changed by exp", changed >= math.ceil(0.99 * reps), changed, f">= {math.ceil(0.99 * reps)}"))
    return out


def suite_hermite(**_):
    grid = np.linspace(-4.0, 4.0, 201)
    e1 = max(abs(hermite_coeff(Subordinator.identity(), 1, x) + norm.pdf(x)) for x in grid)
    pos = np.linspace(0.0, 16.0, 201)
    e2 = max(abs(hermite_coeff(Subordinator.square(), 2, x) + 2 * math.sqrt(x) * norm.pdf(math.sqrt(x))) for x in pos)
    return [
        Check("hermite", "J_1 of identity is -phi", e1 < 1e-8, e1, "< 1e-8"),
        Check("hermite", "J_2 of square is -2 sqrt(x) phi(sqrt(x))", e2 < 1e-8, e2, "< 1e-8"),
    ]


def suite_normalization(**_):
    out = []
    for n, H in ((64, 0.6), (512, 0.75), (4096, 0.9)):
        d = normalization_dn(n, 1, GaussianModel.fgn(H), mode="exact").value
        rel = abs(d * d / n ** (2 * H) - 1.0)
        out.append(Check("normalization", f"exact d^2 = n^2H at n={n}, H={H}", rel < 1e-9, rel, "< 1e-9"))
    for m, H in ((1, 0.7), (2, 0.9)):
        model = GaussianModel.fgn(H)
        ex = normalization_dn(4096, m, model, mode="exact").value ** 2
        asy = normalization_dn(4096, m, model, mode="asymptotic").value ** 2
        rel = abs(asy / ex - 1.0)
        out.append(Check("normalization", f"asymptotic within 2% at n=4096, m={m}, H={H}", rel < 0.02, rel, "< 0.02"))
    return out


def suite_reduction(ns=(256, 1024, 4096), reps=200, seed=DEFAULT_SEED, **_):
    model = GaussianModel.fgn(0.9)
    vals = [reduction_residual(model, Subordinator.square(), 2, n, reps, seed=SeedSpec(seed, 0, (9, 3, n))) for n in ns]
    ok = all(a > b for a, b in zip(vals, vals[1:]))
    return [Check("reduction", f"sup residual decreases over n={list(ns)}", ok, vals, "strictly decreasing")]


def suite_whittle(reps=200, seed=DEFAULT_SEED, **_):
    out = []
    for H in (0.6, 0.8):
        X = simulate_many(GaussianModel.fgn(H), 1000, seed, range(reps), stream=(9, 4, int(H * 100)))
        mean = float(np.mean([local_whittle(x).raw_value for x in X]))
        out.append(Check("whittle", f"mean estimate at H={H}, n=1000", abs(mean - H) <= 0.03, mean, f"{H} +- 0.03"))
    X = simulate_many(GaussianModel.fgn(0.8), 2000, seed, range(reps), stream=(9, 5))
    C = float(np.mean([estimate_scale(x, local_whittle(x)).C_hat for x in X]))
    out.append(Check("whittle", "scale constant at H=0.8, n=2000", abs(C / 0.48 - 1) <= 0.15, C, "0.48 +- 15%"))
    return out


def suite_limit(reps=10_000, seed=DEFAULT_SEED, **_):
    sample = limit_functional(1, 0.5, 2048, reps, seed=seed)
    p = float(np.mean(sample.values > 1.358))
    p0 = asymptotic_power(0.0, 0.5, 0.7, 0.05, reps, seed=seed)
    return [
        Check("limit", "P(sup|bridge| > 1.358) at H=0.5", abs(p - 0.05) <= 0.01, p, "0.05 +- 0.01"),
        Check("limit", "asymptotic power at C=0", abs(p0 - 0.05) <= 0.01, p0, "0.05 +- 0.01"),
    ]


def suite_are(**_):
    q = 1.5
    base = fstar(1.0, 0.0, q, 0.5, 0.1, 0.9)
    up = fstar(1.0, 1.0, q, 0.5, 0.1, 0.9)
    a_small = are_mean_variance(1.0, 1e-6, q, 0.5, 0.1, 0.9, 0.7)
    a_one = are_mean_variance(1.0, 1.0, q, 0.5, 0.1, 0.9, 0.7)
    return [
        Check("are", "fstar(C1, 0) == C1", base == 1.0, base, "exactly 1.0"),
        Check("are", "fstar(C1, C2 > 0) > C1", up > 1.0, up, "> 1.0"),
        Check("are", "ARE > 1 for C2* = 1", a_one > 1.0, a_one, "> 1"),
        Check("are", "ARE -> 1 as C2* -> 0", abs(a_small - 1.0) <= 1e-3, a_small, "1 +- 1e-3"),
        Check("are", "ratio r = 1/3", abs(PHI3_MOMENT_RATIO - 1 / 3) <= 1e-8, PHI3_MOMENT_RATIO, "1/3 +- 1e-8"),
    ]


SUITES = {
    "oracle": suite_oracle,
    "invariance": suite_invariance,
    "hermite": suite_hermite,
    "normalization": suite_normalization,
    "reduction": suite_reduction,
    "whittle": suite_whittle,
    "limit": suite_limit,
    "are": suite_are,
}


def run_suite(name: str, **kwargs) -> list:
    """Run one suite (or ``"all"``); keyword arguments a suite does not use are ignored."""
    if name == "all":
        return [c for suite in SUITES.values() for c in suite(**kwargs)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {sorted(SUITES)} or 'all'")
    return SUITES[name](**kwargs)
