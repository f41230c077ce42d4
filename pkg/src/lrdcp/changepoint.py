"""Change-point tests: statistic, Hurst handling and calibration in one call.

The decision compares the raw statistic with a raw-scale critical value from
fGn(H) simulations.  ``H`` is either supplied or estimated from the series.
With ``scale="estimated"`` the normalization ``d_hat_n`` replaces the fGn
normalization ``n^H``; since the table lives on the raw scale this amounts to
multiplying the critical value by ``(d_hat_n / n^H)^p`` (``p = 2`` for CvM).
When the estimate of ``C`` sits at its floor the fGn normalization is kept.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DomainError, check_alpha, check_hurst, check_series
from .calibrate import DEFAULT_SEED, CriticalValueTable, NullCalibrator
from .estimators import HurstEstimate, estimate_scale, local_whittle, split_whittle
from .stats import (
    RawStatistics,
    StatisticKind,
    compute_raw,
    normalization_power,
    normalize,
)
from .subordinate import Normalization

__all__ = ["ChangePointTest", "TestReport", "run_test", "decide"]

HURST_MODES = ("known", "whittle", "split")
SCALE_MODES = ("fgn", "estimated")


@dataclass(frozen=True)
class TestReport:
    """Outcome of one change-point test.

    ``critical_value`` and ``normalized_value`` are on the limit scale given by
    ``normalization.value``; ``raw_critical_value`` is the threshold applied
    to ``raw_value``.  CUSUM and Wilcoxon always use the order-1 scale.
    """

    __test__ = False

    kind: str
    n: int
    raw_value: float
    k_hat: int
    hurst_mode: str
    hurst_used: float
    normalization: Normalization
    normalized_value: float
    critical_value: float
    raw_critical_value: float
    alpha: float
    reject: bool
    scale_mode: str
    hurst_estimate: dict | None = None
    scale_estimate: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _resolve_hurst(y, kind, hurst, k_hat):
    if isinstance(hurst, numbers.Real) and not isinstance(hurst, bool):
        return "known", check_hurst(float(hurst)), None
    if isinstance(hurst, HurstEstimate):
        return ("split" if hurst.method == "split_whittle" else "whittle"), hurst.value, hurst
    if hurst == "whittle":
        est = local_whittle(y)
    elif hurst == "split":
        est = split_whittle(y, kind, k_hat=k_hat)
    else:
        raise ValueError(f"hurst must be a number or one of 'whittle', 'split'; got {hurst!r}")
    return hurst, est.value, est


def decide(
    y,
    stat: RawStatistics,
    alpha: float,
    hurst,
    calibrator: NullCalibrator | None = None,
    table: CriticalValueTable | None = None,
    scale: str = "fgn",
) -> TestReport:
    """Test decision for a precomputed raw statistic (see :func:`run_test`)."""
    kind = StatisticKind.parse(stat.kind)
    n = y.shape[0]
    alpha = check_alpha(alpha)
    if scale not in SCALE_MODES:
        raise ValueError(f"scale must be one of {SCALE_MODES}, got {scale!r}")
    mode, H, est = _resolve_hurst(y, kind, hurst, stat.argmax_k)
    if table is not None:
        cv = table.lookup(kind, n, H, alpha)
    else:
        calibrator = calibrator or NullCalibrator()
        cv = calibrator.critical_value(kind, n, H, alpha) if mode == "known" else calibrator.interpolated_critical_value(
            kind, n, H, alpha
        )
    d = float(n) ** H
    norm = Normalization(n, 1, H, H * (2.0 * H - 1.0), d, "fgn")
    scale_doc = None
    if scale == "estimated":
        if not H > 0.5:
            raise DomainError(f"estimated scaling needs H > 0.5, got {H}")
        se = estimate_scale(y, H, standardize=kind is not StatisticKind.CUSUM)
        scale_doc = se.to_dict()
        # a floored C_hat carries no scale information; keep the fGn normalization
        if not se.floored:
            cv *= (se.d_hat_n / d) ** normalization_power(kind)
            d = se.d_hat_n
            norm = Normalization(n, 1, H, se.C_hat, d, "estimated")
    return TestReport(
        kind=kind.value,
        n=n,
        raw_value=stat.raw_value,
        k_hat=stat.argmax_k,
        hurst_mode=mode,
        hurst_used=H,
        normalization=norm,
        normalized_value=normalize(stat.raw_value, kind, d, n),
        critical_value=normalize(cv, kind, d, n),
        raw_critical_value=cv,
        alpha=alpha,
        reject=bool(stat.raw_value > cv),
        scale_mode=scale,
        hurst_estimate=None if est is None else est.to_dict(),
        scale_estimate=scale_doc,
    )


def run_test(
    series,
    kind="cvm",
    alpha: float = 0.05,
    hurst="whittle",
    calibrator: NullCalibrator | None = None,
    table: CriticalValueTable | None = None,
    scale: str = "fgn",
) -> TestReport:
    """Run a change-point test on ``series``.

    Parameters
    ----------
    series : array_like
    kind : {"ks", "cvm", "cusum", "wilcoxon"}
    alpha : float
    hurst : float, HurstEstimate or {"whittle", "split"}
        A number is taken as the known Hurst coefficient and calibrated at
        exactly that value; estimates are calibrated by interpolation on the
        grid ``0.50, 0.51, ..., 0.99``.
    calibrator : NullCalibrator, optional
        Source of Monte Carlo critical values (``J = 1000`` by default).
    table : CriticalValueTable, optional
        Precomputed table; takes precedence over ``calibrator``.
    scale : {"fgn", "estimated"}
        ``estimated`` rescales with ``d_hat_n`` from :func:`estimate_scale`.
    """
    y = check_series(series, min_length=8)
    return decide(y, compute_raw(y, kind), alpha, hurst, calibrator, table, scale)


class ChangePointTest(BaseEstimator):
    """Scikit-learn style wrapper around :func:`run_test`.

    Parameters
    ----------
    statistic : {"ks", "cvm", "cusum", "wilcoxon"}
    alpha : float
    hurst : float or {"whittle", "split"}
    scale : {"fgn", "estimated"}
    J : int
        Monte Carlo replicates for the critical values.
    random_state : int, optional
        Master seed of the calibration simulations.
    table : CriticalValueTable, optional

    Attributes
    ----------
    report_ : TestReport
    reject_ : bool
    k_hat_ : int
    """

    def __init__(self, statistic="cvm", alpha=0.05, hurst="whittle", scale="fgn", J=1000, random_state=None, table=None):
        self.statistic = statistic
        self.alpha = alpha
        self.hurst = hurst
        self.scale = scale
        self.J = J
        self.random_state = random_state
        self.table = table

    def _calibrator(self):
        if not hasattr(self, "calibrator_"):
            seed = DEFAULT_SEED if self.random_state is None else int(self.random_state)
            self.calibrator_ = NullCalibrator(self.J, seed)
        return self.calibrator_

    def _run(self, X):
        return run_test(X, self.statistic, self.alpha, self.hurst, self._calibrator(), self.table, self.scale)

    def fit(self, X, y=None):
        self.report_ = self._run(X)
        self.reject_ = self.report_.reject
        self.k_hat_ = self.report_.k_hat
        self.n_ = self.report_.n
        return self

    def predict(self, X):
        """Segment labels of ``X``: 1 after a detected change, else 0."""
        check_is_fitted(self, "report_")
        report = self._run(X)
        labels = np.zeros(report.n, dtype=np.int64)
        if report.reject:
            labels[report.k_hat :] = 1
        return labels

    def fit_predict(self, X, y=None):
        self.fit(X)
        labels = np.zeros(self.n_, dtype=np.int64)
        if self.reject_:
            labels[self.k_hat_ :] = 1
        return labels

    def score(self, X, y=None):
        """Normalized statistic divided by its critical value."""
        report = self._run(X)
        return report.normalized_value / report.critical_value if report.critical_value > 0 else math.inf
