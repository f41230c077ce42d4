"""Change-point statistics: Kolmogorov-Smirnov, Cramer-von Mises, CUSUM, Wilcoxon.

All four are maxima over split points ``k = 1, ..., n-1`` of a bridge-type
profile.  The rank statistics (KS, CvM, Wilcoxon) are evaluated on max-ranks
``R_j = #{i : Y_i <= Y_j}`` using exact integer arithmetic inside the inner
loops, so strictly increasing transforms of the data leave them bit-identical.

With ``C_k(j) = #{i <= k : Y_i <= Y_j}`` the empirical bridge at ``(k, Y_j)``
equals ``(n C_k(j) - k R_j) / n``; advancing ``k`` increments ``C_k`` on the
upper set of the new observation, which yields O(n^2) time and O(n) memory.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numba
import numpy as np

from ._validation import check_series

__all__ = [
    "RawStatistics",
    "StatisticKind",
    "changepoint_estimate",
    "compute_raw",
    "compute_many",
    "cusum_raw",
    "cvm_raw",
    "ks_raw",
    "max_ranks",
    "normalization_power",
    "normalize",
    "wilcoxon_raw",
]


class StatisticKind(str, Enum):
    KS = "ks"
    CVM = "cvm"
    CUSUM = "cusum"
    WILCOXON = "wilcoxon"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, value) -> "StatisticKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown statistic {value!r}; expected one of {[k.value for k in cls]}") from None


@dataclass(frozen=True)
class RawStatistics:
    """Unnormalized statistic, its smallest maximizing split and the profile.

    ``profile[k - 1]`` holds the value at split ``k``.
    """

    kind: StatisticKind
    raw_value: float
    argmax_k: int
    profile: np.ndarray = field(repr=False)


def max_ranks(y: np.ndarray) -> np.ndarray:
    """``R_j = #{i : y_i <= y_j}`` as int64."""
    return np.searchsorted(np.sort(y), y, side="right").astype(np.int64)


@numba.njit(cache=True)
def _bridge_profiles(R):
    n = R.shape[0]
    count = np.zeros(n, np.int64)
    ks = np.empty(n - 1)
    cvm = np.empty(n - 1)
    for k in range(1, n):
        rk = R[k - 1]
        worst = 0
        ss = 0.0
        for j in range(n):
            if R[j] >= rk:
                count[j] += 1
            dev = n * count[j] - k * R[j]
            if dev < 0:
                dev = -dev
            if dev > worst:
                worst = dev
            ss += float(dev) * float(dev)
        ks[k - 1] = worst / n
        cvm[k - 1] = ss / (float(n) * n * n)
    return ks, cvm


@numba.njit(cache=True)
def _wilcoxon_profile(R):
    n = R.shape[0]
    out = np.empty(n - 1)
    twice = 0
    for k in range(1, n):
        rk = R[k - 1]
        above = 0
        for j in range(k, n):
            if rk <= R[j]:
                above += 1
        below = 0
        for i in range(k - 1):
            if R[i] <= rk:
                below += 1
        # element k leaves the right block and joins the left block
        twice += 2 * above - (n - k) - 2 * below + (k - 1)
        out[k - 1] = abs(twice) / 2.0
    return out


def _cusum_profile(y: np.ndarray) -> np.ndarray:
    n = y.shape[0]
    # anchoring at y[0] keeps constant series exactly zero
    csum = np.cumsum(y - y[0])
    k = np.arange(1, n)
    return np.abs(csum[:-1] - k / n * csum[-1])


def _pack(kind: StatisticKind, profile: np.ndarray) -> RawStatistics:
    k = int(np.argmax(profile))
    return RawStatistics(kind, float(profile[k]), k + 1, profile)


def ks_raw(series) -> RawStatistics:
    """``max_k max_x |sum_{i<=k} 1{Y_i<=x} - (k/n) sum_{i<=n} 1{Y_i<=x}|``.

    The sup over ``x`` is attained at a sample point, so only sample points
    are scanned.  Normalize by ``d_{n,m}``.
    """
    y = check_series(series)
    ks, _ = _bridge_profiles(max_ranks(y))
    return _pack(StatisticKind.KS, ks)


def cvm_raw(series) -> RawStatistics:
    """Cramer-von Mises profile integrated against the pooled empirical cdf.

    Normalize by ``d_{n,m}^2``.
    """
    y = check_series(series)
    _, cvm = _bridge_profiles(max_ranks(y))
    return _pack(StatisticKind.CVM, cvm)


def cusum_raw(series) -> RawStatistics:
    """``max_k |sum_{i<=k} Y_i - (k/n) sum_{i<=n} Y_i|``; normalize by ``d_{n,1}``."""
    y = check_series(series)
    return _pack(StatisticKind.CUSUM, _cusum_profile(y))


def wilcoxon_raw(series) -> RawStatistics:
    """``max_k |sum_{i<=k} sum_{j>k} (1{Y_i <= Y_j} - 1/2)|``; normalize by ``n d_{n,1}``.

    Ties count as ``1{Y_i <= Y_j} = 1``.
    """
    y = check_series(series)
    return _pack(StatisticKind.WILCOXON, _wilcoxon_profile(max_ranks(y)))


_DISPATCH = {
    StatisticKind.KS: ks_raw,
    StatisticKind.CVM: cvm_raw,
    StatisticKind.CUSUM: cusum_raw,
    StatisticKind.WILCOXON: wilcoxon_raw,
}


def compute_raw(series, kind) -> RawStatistics:
    return _DISPATCH[StatisticKind.parse(kind)](series)


def compute_many(series, kinds) -> dict:
    """Evaluate several statistics on one series, sharing the rank pass."""
    y = check_series(series)
    kinds = [StatisticKind.parse(k) for k in kinds]
    out = {}
    ranks = None
    if StatisticKind.KS in kinds or StatisticKind.CVM in kinds:
        ranks = max_ranks(y)
        ks, cvm = _bridge_profiles(ranks)
        if StatisticKind.KS in kinds:
            out[StatisticKind.KS] = _pack(StatisticKind.KS, ks)
        if StatisticKind.CVM in kinds:
            out[StatisticKind.CVM] = _pack(StatisticKind.CVM, cvm)
    if StatisticKind.WILCOXON in kinds:
        ranks = max_ranks(y) if ranks is None else ranks
        out[StatisticKind.WILCOXON] = _pack(StatisticKind.WILCOXON, _wilcoxon_profile(ranks))
    if StatisticKind.CUSUM in kinds:
        out[StatisticKind.CUSUM] = _pack(StatisticKind.CUSUM, _cusum_profile(y))
    return out


def changepoint_estimate(series, kind) -> int:
    """Smallest split ``k`` maximizing the profile of statistic ``kind``."""
    return compute_raw(series, kind).argmax_k


def normalization_power(kind) -> int:
    """Power of ``d_n`` that scales the raw statistic (2 for CvM, else 1)."""
    return 2 if StatisticKind.parse(kind) is StatisticKind.CVM else 1


def normalize(raw_value: float, kind, d_n: float, n: int) -> float:
    """Map a raw statistic onto the limit scale given normalization ``d_n``."""
    kind = StatisticKind.parse(kind)
    if kind is StatisticKind.CVM:
        return raw_value / d_n**2
    if kind is StatisticKind.WILCOXON:
        return raw_value / (n * d_n)
    return raw_value / d_n
