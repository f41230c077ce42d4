"""Hurst-coefficient and normalization-constant estimation.

Functional API (``periodogram``, ``local_whittle``, ``split_whittle``,
``estimate_scale``) plus two scikit-learn style estimators wrapping it.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import DegenerateInputError, check_series
from .stats import StatisticKind, changepoint_estimate

__all__ = [
    "HURST_FLOOR",
    "HurstEstimate",
    "LocalWhittleEstimator",
    "ScaleEstimate",
    "SplitWhittleEstimator",
    "estimate_scale",
    "local_whittle",
    "periodogram",
    "split_whittle",
    "whittle_objective",
]

HURST_FLOOR = 0.501
C_FLOOR = 1e-6
_BRACKET = (0.01, 0.99)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HurstEstimate:
    value: float
    raw_value: float
    method: str
    bandwidth: int
    split_k: int | None = None
    fallback: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScaleEstimate:
    """Estimated constant ``C`` of ``rho(k) k^{2-2H} -> C`` and the implied ``d_n``."""

    C_hat: float
    K: int
    d_hat_n: float
    hurst: float
    n: int
    floored: bool = False

    def d_hat(self, n: int) -> float:
        return scale_normalization(n, self.hurst, self.C_hat)

    def to_dict(self) -> dict:
        return asdict(self)


def periodogram(series):
    """Periodogram at the Fourier frequencies ``2 pi j / n``, ``j = 1..floor(n/2)``.

    Returns
    -------
    freqs, ordinates : numpy.ndarray
        ``I(lambda_j) = |sum_t Y_t exp(-i t lambda_j)|^2 / (2 pi n)``.
    """
    y = check_series(series, min_length=4)
    n = y.shape[0]
    half = n // 2
    dft = np.fft.rfft(y)[1 : half + 1]
    freqs = 2.0 * np.pi * np.arange(1, half + 1) / n
    return freqs, (dft.real**2 + dft.imag**2) / (2.0 * np.pi * n)


def default_bandwidth(n: int) -> int:
    return max(2, min(int(math.floor(n ** (2.0 / 3.0))), n // 2))


def whittle_objective(H: float, freqs: np.ndarray, ordinates: np.ndarray) -> float:
    """Profiled local Whittle objective over the supplied band."""
    g = 2.0 * H - 1.0
    return math.log(np.mean(freqs**g * ordinates)) - g * np.mean(np.log(freqs))


def _golden_section(f, a: float, b: float, tol: float = 1e-5) -> float:
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def local_whittle(series, bandwidth: int | None = None) -> HurstEstimate:
    """Local Whittle estimate over the lowest ``bandwidth`` Fourier frequencies.

    The default bandwidth is ``floor(n^{2/3})``.  The objective is minimized on
    ``[0.01, 0.99]`` by golden-section search (tolerance 1e-5) and the reported
    ``value`` is clamped below at 0.501.
    """
    y = check_series(series, min_length=4)
    n = y.shape[0]
    m = default_bandwidth(n) if bandwidth is None else int(bandwidth)
    if not 2 <= m <= n // 2:
        raise ValueError(f"bandwidth must lie in [2, {n // 2}], got {m}")
    freqs, ords = periodogram(y)
    freqs, ords = freqs[:m], ords[:m]
    if not np.any(ords > 0):
        raise DegenerateInputError("all periodogram ordinates in the band are zero")
    raw = _golden_section(lambda h: whittle_objective(h, freqs, ords), *_BRACKET)
    return HurstEstimate(max(raw, HURST_FLOOR), raw, "whittle", m)


def split_whittle(series, kind="cvm", k_hat: int | None = None) -> HurstEstimate:
    """Weighted local Whittle estimate on the two sides of the estimated change.

    ``k_hat`` defaults to the change-point estimate of statistic ``kind``.
    The segment estimates (each with its own default bandwidth) are combined
    as ``(k/n) H_1 + ((n-k)/n) H_2`` and then clamped.  When a nonempty segment
    is shorter than 4 or degenerate, the whole-series estimate is returned with
    ``fallback=True``; ``k_hat = n`` returns the whole-series estimate.
    """
    y = check_series(series, min_length=8)
    n = y.shape[0]
    k = changepoint_estimate(y, StatisticKind.parse(kind)) if k_hat is None else int(k_hat)
    if not 1 <= k <= n:
        raise ValueError(f"k_hat must lie in [1, {n}], got {k}")
    whole = local_whittle(y)
    if k == n:
        return HurstEstimate(whole.value, whole.raw_value, "split_whittle", whole.bandwidth, k)
    if k < 4 or n - k < 4:
        return HurstEstimate(whole.value, whole.raw_value, "split_whittle", whole.bandwidth, k, fallback=True)
    try:
        left = local_whittle(y[:k])
        right = local_whittle(y[k:])
    except DegenerateInputError:
        return HurstEstimate(whole.value, whole.raw_value, "split_whittle", whole.bandwidth, k, fallback=True)
    raw = (k / n) * left.raw_value + ((n - k) / n) * right.raw_value
    return HurstEstimate(max(raw, HURST_FLOOR), raw, "split_whittle", whole.bandwidth, k)


def scale_normalization(n: int, hurst: float, C_hat: float) -> float:
    """``d_n = n^H (C / (H (2H - 1)))^{1/2}``, which reduces to ``n^H`` for fGn."""
    return n**hurst * math.sqrt(C_hat / (hurst * (2.0 * hurst - 1.0)))


def estimate_scale(
    series, hurst, K: int | None = None, standardize: bool = True, mean_correction: bool = True
) -> ScaleEstimate:
    """Heuristic estimate of the long-memory constant and the implied ``d_n``.

    ``C_hat = max(1e-6, K^{-1} sum_{k=1}^K rho_hat(k) k^{2 - 2H})`` where
    ``rho_hat`` is the biased (1/n) sample autocorrelation of the demeaned
    series (autocovariance when ``standardize`` is False, in which case
    ``C_hat`` scales with the variance).  ``floored`` marks estimates where
    the average was at or below the floor and carries no scale information.

    Demeaning a long-memory series pulls every sample autocorrelation down by
    about ``v = Var(mean) / Var(Y)``, which is ``n^{2H-2}`` for fGn.  With
    ``mean_correction`` the lags are mapped back through
    ``rho = v + (1 - v) rho_hat``, computed at ``v = n^{2H-2}``.

    Parameters
    ----------
    series : array_like
    hurst : HurstEstimate or float
        Must be > 0.5 (clamped estimates always are).
    K : int, optional
        Number of lags, default ``floor(n^{1/3})``; ``1 <= K <= n/4``.
    """
    y = check_series(series, min_length=4)
    n = y.shape[0]
    H = float(hurst.value if isinstance(hurst, HurstEstimate) else hurst)
    if not 0.5 < H < 1.0:
        raise ValueError(f"scale estimation needs 0.5 < H < 1, got {H}")
    K = max(1, int(math.floor(n ** (1.0 / 3.0)))) if K is None else int(K)
    if not 1 <= K <= n / 4:
        raise ValueError(f"K must lie in [1, n/4], got {K}")
    z = y - y.mean()
    gamma0 = float(np.dot(z, z)) / n
    if gamma0 == 0.0:
        raise DegenerateInputError("constant series has no autocovariance")
    lags = np.arange(1, K + 1)
    acov = np.array([np.dot(z[:-k], z[k:]) / n for k in lags])
    if mean_correction:
        v = n ** (2.0 * H - 2.0)
        acov = acov + v * gamma0 / (1.0 - v)
        gamma0 = gamma0 / (1.0 - v)
    if standardize:
        acov = acov / gamma0
    raw = float(np.mean(acov * lags ** (2.0 - 2.0 * H)))
    C = max(C_FLOOR, raw)
    return ScaleEstimate(C, K, scale_normalization(n, H, C), H, n, floored=raw <= C_FLOOR)


class LocalWhittleEstimator(BaseEstimator):
    """Local Whittle Hurst estimator.

    Parameters
    ----------
    bandwidth : int, optional
        Number of Fourier frequencies; ``floor(n^{2/3})`` when omitted.

    Attributes
    ----------
    hurst_ : float
        Clamped estimate.
    estimate_ : HurstEstimate
    """

    def __init__(self, bandwidth=None):
        self.bandwidth = bandwidth

    def fit(self, X, y=None):
        self.estimate_ = local_whittle(check_series(X, min_length=4, name="X"), self.bandwidth)
        self.hurst_ = self.estimate_.value
        return self


class SplitWhittleEstimator(BaseEstimator):
    """Local Whittle estimator split at the change point of a statistic.

    Parameters
    ----------
    statistic : {"ks", "cvm", "cusum", "wilcoxon"}
        Statistic whose change-point estimate splits the sample.
    """

    def __init__(self, statistic="cvm"):
        self.statistic = statistic

    def fit(self, X, y=None):
        self.estimate_ = split_whittle(check_series(X, min_length=8, name="X"), self.statistic)
        self.hurst_ = self.estimate_.value
        self.split_k_ = self.estimate_.split_k
        self.n_ = check_series(X, min_length=8, name="X").shape[0]
        return self

    def segment_labels(self):
        """0 for observations up to the split, 1 after it."""
        check_is_fitted(self, "estimate_")
        return (np.arange(1, self.n_ + 1) > self.split_k_).astype(np.int64)
