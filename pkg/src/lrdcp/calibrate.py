"""Critical values for the change-point statistics.

Two calibration modes are provided.

* Monte Carlo on the raw scale: simulate ``J`` fGn(H) series of length ``n``,
  evaluate the raw statistics and keep empirical quantiles.  The unknown
  normalization cancels because test statistic and quantile share the scale.
* Asymptotic: quantiles of ``sup_t |Z~_{m,H}(t)|`` of the bridged Hermite
  process, mapped back to the raw scale by ``d_{n,m}`` and the Hermite
  coefficients of the marginal transform.

Empirical quantiles use the order statistic at index ``ceil((1 - alpha) J)``
(1-based) and a test rejects when the statistic strictly exceeds it.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import threading
import time
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import DomainError, check_alpha, check_hurst, check_positive_int
from .sim import GaussianModel, SeedSpec, simulate_many
from .stats import StatisticKind, compute_many, normalization_power
from .subordinate import (
    Subordinator,
    hermite_coeffs,
    hermite_poly,
    hermite_rank,
    normalization_dn,
)

__all__ = [
    "DEFAULT_SEED",
    "HURST_GRID_STEP",
    "CriticalValueTable",
    "LimitFunctionalSample",
    "NullCalibrator",
    "UnsupportedOrderError",
    "asymptotic_critical_value",
    "asymptotic_power",
    "empirical_quantile",
    "limit_functional",
    "mc_critical_values",
    "psi_tau",
]

DEFAULT_SEED = 20240917
HURST_GRID_STEP = 0.01
TABLE_DIR_ENV = "LRDCP_TABLE_DIR"
_ALL_KINDS = tuple(StatisticKind)

# stream tags keep calibration, limit-process and power draws independent
_CALIB_STREAM = 1
_LIMIT_STREAM = 2


class UnsupportedOrderError(ValueError):
    """Limit processes are only implemented for Hermite order 1 and 2."""


def _h_key(H: float) -> int:
    return int(round(H * 1_000_000))


def psi_tau(t, tau: float):
    """Tent-shaped drift ``t (1 - tau)`` for ``t <= tau`` and ``tau (1 - t)`` after."""
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t <= tau, t * (1.0 - tau), tau * (1.0 - t))
    return float(out) if out.ndim == 0 else out


def empirical_quantile(values, alpha: float) -> float:
    """Order statistic ``ceil((1 - alpha) J)`` (1-based) of ``values``."""
    alpha = check_alpha(alpha)
    v = np.sort(np.asarray(values, dtype=np.float64))
    idx = int(math.ceil((1.0 - alpha) * v.shape[0] - 1e-9))
    return float(v[min(max(idx, 1), v.shape[0]) - 1])


# ---------------------------------------------------------------------------
# Monte Carlo tables
# ---------------------------------------------------------------------------


@dataclass
class CriticalValueTable:
    """Raw-scale critical values keyed by ``(stat, n, H, alpha, J)``.

    ``created`` is a POSIX timestamp, or ``None`` for replayable artifacts.
    """

    entries: dict = field(default_factory=dict)
    master_seed: int = DEFAULT_SEED
    created: float | None = field(default_factory=time.time)

    @staticmethod
    def key(kind, n: int, H: float, alpha: float, J: int) -> tuple:
        return (StatisticKind.parse(kind).value, int(n), round(float(H), 6), round(float(alpha), 10), int(J))

    def add(self, kind, n, H, alpha, J, value: float) -> None:
        self.entries[self.key(kind, n, H, alpha, J)] = float(value)

    def get(self, kind, n, H, alpha, J=None) -> float:
        """Exact lookup; ``J=None`` picks the largest ``J`` stored for the key."""
        if J is not None:
            return self.entries[self.key(kind, n, H, alpha, J)]
        stat, n, H, alpha, _ = self.key(kind, n, H, alpha, 0)
        found = [(k[4], v) for k, v in self.entries.items() if k[:4] == (stat, n, H, alpha)]
        if not found:
            raise KeyError((stat, n, H, alpha))
        return max(found)[1]

    def lookup(self, kind, n, H, alpha) -> float:
        """Value at ``H``, linearly interpolated between the nearest stored H values."""
        stat, n, Hr, alpha, _ = self.key(kind, n, H, alpha, 0)
        best = {}
        for k, v in self.entries.items():
            if (k[0], k[1], k[3]) == (stat, n, alpha) and k[4] >= best.get(k[2], (-1, 0.0))[0]:
                best[k[2]] = (k[4], v)
        if not best:
            raise KeyError(f"no entries for stat={stat} n={n} alpha={alpha}")
        hs = np.array(sorted(best))
        if not hs[0] <= Hr <= hs[-1]:
            raise DomainError(f"H={H} outside the tabulated range [{hs[0]}, {hs[-1]}]")
        return float(np.interp(Hr, hs, [best[h][1] for h in hs]))

    def merge(self, other: "CriticalValueTable") -> "CriticalValueTable":
        self.entries.update(other.entries)
        return self

    def to_dict(self) -> dict:
        rows = [
            {"stat": k[0], "n": k[1], "H": k[2], "alpha": k[3], "J": k[4], "value": v}
            for k, v in sorted(self.entries.items())
        ]
        return {"entries": rows, "master_seed": self.master_seed, "created": self.created}

    @classmethod
    def from_dict(cls, doc: dict) -> "CriticalValueTable":
        created = doc.get("created")
        table = cls(master_seed=int(doc.get("master_seed", DEFAULT_SEED)), created=None if created is None else float(created))
        for row in doc["entries"]:
            table.add(row["stat"], row["n"], row["H"], row["alpha"], row["J"], row["value"])
        return table

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def save(self, path) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path) -> "CriticalValueTable":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary sibling file and ``os.replace``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def null_statistics(n: int, H: float, J: int, master_seed: int = DEFAULT_SEED) -> dict:
    """Raw statistics of ``J`` null fGn(H) series, sorted, one array per kind.

    All kinds are evaluated on the same simulated series, whose seeds depend
    only on ``(master_seed, n, H)`` and the replicate index.
    """
    n = check_positive_int(n, "n", minimum=4)
    J = check_positive_int(J, "J")
    H = check_hurst(H)
    X = simulate_many(GaussianModel.fgn(H), n, master_seed, range(J), stream=(_CALIB_STREAM, n, _h_key(H)))
    out = {k: np.empty(J) for k in _ALL_KINDS}
    for j in range(J):
        for kind, res in compute_many(X[j], _ALL_KINDS).items():
            out[kind][j] = res.raw_value
    return {k: np.sort(v) for k, v in out.items()}


class NullCalibrator:
    """Lazily simulated Monte Carlo null distributions with in-memory and disk caches.

    Parameters
    ----------
    J : int
        Null replicates per ``(n, H)``.
    master_seed : int
    cache_dir : path, optional
        Directory for ``.npz`` caches of the sorted null statistics.  Defaults
        to ``$LRDCP_TABLE_DIR`` when set; ``False`` disables the disk cache.
    max_memory : int
        Number of ``(n, H)`` cells kept in memory.
    """

    def __init__(self, J: int = 1000, master_seed: int = DEFAULT_SEED, cache_dir=None, max_memory: int = 512):
        if J < 100:
            raise ValueError(f"J must be >= 100, got {J}")
        self.J = int(J)
        self.master_seed = int(master_seed)
        if cache_dir is None:
            cache_dir = os.environ.get(TABLE_DIR_ENV) or None
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.max_memory = max_memory
        self._memory: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def _path(self, n: int, H: float) -> Path:
        return self.cache_dir / f"null_n{n}_H{_h_key(H)}_J{self.J}_s{self.master_seed}.npz"

    def null_sample(self, n: int, H: float) -> dict:
        key = (int(n), _h_key(H))
        with self._lock:
            if key in self._memory:
                self._memory.move_to_end(key)
                return self._memory[key]
        sample = None
        if self.cache_dir is not None and self._path(n, H).exists():
            with np.load(self._path(n, H)) as data:
                sample = {k: data[k.value] for k in _ALL_KINDS}
        if sample is None:
            sample = null_statistics(n, H, self.J, self.master_seed)
            if self.cache_dir is not None:
                self._save(n, H, sample)
        with self._lock:
            self._memory[key] = sample
            while len(self._memory) > self.max_memory:
                self._memory.popitem(last=False)
        return sample

    def _save(self, n, H, sample) -> None:
        path = self._path(n, H)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".npz")
        os.close(fd)
        np.savez(tmp, **{k.value: v for k, v in sample.items()})
        os.replace(tmp, path)

    def critical_value(self, kind, n: int, H: float, alpha: float) -> float:
        """Raw-scale critical value simulated at exactly ``H``."""
        return empirical_quantile(self.null_sample(n, H)[StatisticKind.parse(kind)], alpha)

    def interpolated_critical_value(self, kind, n: int, H: float, alpha: float, step: float = HURST_GRID_STEP) -> float:
        """Critical value at ``H`` interpolated linearly on the H-grid ``0.50, 0.51, ..., 0.99``."""
        H = float(H)
        if not 0.5 <= H <= 0.99 + 1e-12:
            raise DomainError(f"interpolated calibration needs H in [0.5, 0.99], got {H}")
        steps = int(round(1.0 / step))
        pos = H * steps
        lo = min(int(math.floor(pos + 1e-9)), int(round(0.99 * steps)))
        w = pos - lo
        v_lo = self.critical_value(kind, n, lo / steps, alpha)
        if w <= 1e-9:
            return v_lo
        return (1.0 - w) * v_lo + w * self.critical_value(kind, n, (lo + 1) / steps, alpha)

    def table(self, kinds, ns, Hs, alphas) -> CriticalValueTable:
        table = CriticalValueTable(master_seed=self.master_seed)
        for n in ns:
            for H in Hs:
                for kind in kinds:
                    for a in alphas:
                        table.add(kind, n, H, a, self.J, self.critical_value(kind, n, H, a))
        return table


def mc_critical_values(kind, n: int, H: float, alphas, J: int = 1000, seed: int = DEFAULT_SEED) -> CriticalValueTable:
    """Monte Carlo critical values of one or several statistics at ``(n, H)``.

    Parameters
    ----------
    kind : str, StatisticKind or iterable of them
    n : int
    H : float
        Hurst coefficient of the simulated fGn.
    alphas : float or iterable of float
    J : int
        Replicates, at least 100.
    seed : int
        Master seed; the table is a pure function of ``(seed, kind, n, H, J)``.
    """
    kinds = [kind] if isinstance(kind, (str, StatisticKind)) else list(kind)
    alphas = [alphas] if np.isscalar(alphas) else list(alphas)
    if J < 100:
        raise ValueError(f"J must be >= 100, got {J}")
    cal = NullCalibrator(J, seed, cache_dir=False)
    return cal.table([StatisticKind.parse(k) for k in kinds], [n], [H], [check_alpha(a) for a in alphas])


# ---------------------------------------------------------------------------
# Limit processes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitFunctionalSample:
    """Realizations of ``sup_t |Z~_{m,H}(t) + C psi_tau(t)|``."""

    m: int
    H: float
    grid_size: int
    values: np.ndarray = field(repr=False)
    shift: tuple | None = None

    def quantile(self, level: float) -> float:
        return empirical_quantile(self.values, 1.0 - level)


def _limit_paths(m: int, H: float, grid: int, master_seed: int, indices, stream) -> np.ndarray:
    """Bridged paths on ``t = 0, 1/grid, ..., 1``; rows are replicates."""
    if m == 1:
        inc = simulate_many(GaussianModel.fgn(H), grid, master_seed, indices, stream)
        Z = np.cumsum(inc, axis=1) * float(grid) ** (-H)
    else:
        H_x = (1.0 + H) / 2.0
        N = max(2**14, 16 * grid)
        latent = GaussianModel.fgn(H_x)
        d = normalization_dn(N, 2, latent).value
        X = simulate_many(latent, N, master_seed, indices, stream)
        S = np.cumsum(X * X - 1.0, axis=1) / d
        Z = S[:, np.floor(N * np.arange(1, grid + 1) / grid).astype(np.int64) - 1]
    Z = np.concatenate([np.zeros((Z.shape[0], 1)), Z], axis=1)
    t = np.arange(grid + 1) / grid
    return Z - t[None, :] * Z[:, -1:]


def limit_functional(
    m: int,
    H: float,
    grid: int = 2048,
    reps: int = 10_000,
    shift=None,
    seed=DEFAULT_SEED,
    chunk: int = 256,
) -> LimitFunctionalSample:
    """Simulate ``sup_t |Z~_{m,H}(t) + C psi_tau(t)|``.

    Parameters
    ----------
    m : {1, 2}
        Hermite order. ``m = 1`` gives the fractional Brownian bridge, built
        from cumulative sums of exact fGn increments scaled by ``grid^{-H}``.
        For ``m = 2`` the Rosenblatt process with Hurst parameter ``H`` is
        approximated by normalized partial sums of ``X_i^2 - 1`` over a latent
        fGn with Hurst parameter ``(1 + H) / 2`` and length
        ``max(2^14, 16 grid)``, subsampled to the grid.
    H : float
        Hurst parameter of the limit process (``H > 0.5`` when ``m = 2``).
    grid : int
        Number of grid intervals on ``[0, 1]``, at least 64.
    reps : int
    shift : (C, tau), optional
        Noncentral drift ``C psi_tau``.
    seed : int or SeedSpec
        Replicate ``r`` is drawn from ``SeedSpec(master, r, stream + (m, grid, H))``.
        The drift does not enter the seed, so shifted and unshifted samples
        share paths.
    """
    if m not in (1, 2):
        raise UnsupportedOrderError(f"limit processes are implemented for m in {{1, 2}}, got {m}")
    H = check_hurst(H, lo=0.5 if m == 2 else 0.0)
    grid = check_positive_int(grid, "grid", minimum=64)
    reps = check_positive_int(reps, "reps")
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    stream = tuple(seed.stream) + (_LIMIT_STREAM, m, grid, _h_key(H))
    drift = 0.0
    if shift is not None:
        C, tau = shift
        drift = float(C) * psi_tau(np.arange(grid + 1) / grid, tau)
    out = np.empty(reps)
    for start in range(0, reps, chunk):
        idx = range(start, min(reps, start + chunk))
        paths = _limit_paths(m, H, grid, seed.master_seed, idx, stream)
        out[start : start + len(idx)] = np.abs(paths + drift).max(axis=1)
    return LimitFunctionalSample(m, H, grid, out, None if shift is None else (float(shift[0]), float(shift[1])))


def asymptotic_power(
    C: float, tau: float, H: float, alpha: float = 0.05, reps: int = 10_000, seed=DEFAULT_SEED, grid: int = 2048, m: int = 1
) -> float:
    """``P(sup_t |Z~_{m,H}(t) + C psi_tau(t)| > q_{1-alpha})`` by two-stage Monte Carlo.

    The quantile and the rejection frequency come from independent streams.
    """
    if C < 0:
        raise DomainError(f"C must be >= 0, got {C}")
    alpha = check_alpha(alpha)
    seed = seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))
    q = limit_functional(m, H, grid, reps, seed=SeedSpec(seed.master_seed, 0, tuple(seed.stream) + (0,))).quantile(1 - alpha)
    shifted = limit_functional(
        m, H, grid, reps, shift=(C, tau), seed=SeedSpec(seed.master_seed, 0, tuple(seed.stream) + (1,))
    )
    return float(np.mean(shifted.values > q))


def _limit_factor(kind: StatisticKind, G: Subordinator, m: int, levels: int = 2000) -> float:
    """Deterministic factor multiplying ``sup|Z~|`` (squared for CvM) in the limit."""
    if kind is StatisticKind.CUSUM:
        nodes, weights = np.polynomial.hermite_e.hermegauss(160)
        weights = weights / math.sqrt(2.0 * math.pi)
        c_m = float(np.sum(weights * np.asarray(G(nodes)) * hermite_poly(m, nodes)))
        if abs(c_m) < 1e-12:
            raise DomainError(f"E[G(X) H_{m}(X)] vanishes; the CUSUM limit is degenerate at order {m}")
        return abs(c_m) / math.factorial(m)
    u = (np.arange(levels) + 0.5) / levels
    xs = np.asarray(G.ppf(u), dtype=np.float64)
    Jm = np.array([hermite_coeffs(G, m, x)[m] for x in xs]) / math.factorial(m)
    if kind is StatisticKind.KS:
        return float(np.abs(Jm).max())
    if kind is StatisticKind.CVM:
        return float(np.mean(Jm**2))
    return float(abs(np.mean(Jm)))


def asymptotic_critical_value(
    kind,
    n: int,
    model: GaussianModel,
    alpha: float = 0.05,
    G: Subordinator | None = None,
    reps: int = 10_000,
    grid: int = 1024,
    seed=DEFAULT_SEED,
) -> float:
    """Raw-scale critical value from the limit distribution.

    The raw statistic behaves like ``d^p c sup_t |Z~_{m,H}(t)|^p`` with ``p = 2``
    for CvM (else 1), ``d = d_{n,m}`` (times ``n`` for Wilcoxon) and ``c``
    equal to ``sup_x |J_m(x)| / m!`` for KS, ``int (J_m / m!)^2 dF`` for CvM,
    ``|int J_m dF| / m!`` for Wilcoxon and ``|E[G(X) H_m(X)]| / m!`` for CUSUM.
    """
    kind = StatisticKind.parse(kind)
    G = Subordinator.identity() if G is None else G
    m = hermite_rank(G).rank
    if m not in (1, 2):
        raise UnsupportedOrderError(f"asymptotic calibration needs Hermite rank 1 or 2, got {m}")
    norm = normalization_dn(n, m, model)
    q = limit_functional(m, norm.H, grid, reps, seed=seed).quantile(1 - check_alpha(alpha))
    p = normalization_power(kind)
    scale = norm.value * (n if kind is StatisticKind.WILCOXON else 1)
    return float(_limit_factor(kind, G, m) * (q * scale) ** p)
