"""Simulation studies: change injection, local alternatives, power tables and ARE.

A change at fraction ``tau`` is realized on one latent Gaussian path:
``Y_i = pre(X_i)`` for ``i <= floor(n tau)`` and ``Y_i = post(X_i)`` after.
"""

from __future__ import annotations

import csv
import io
import math
import zlib
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy import optimize, special

from ._validation import (
    DegenerateInputError,
    DomainError,
    check_alpha,
    check_positive_int,
)
from .calibrate import (
    DEFAULT_SEED,
    NullCalibrator,
    asymptotic_power,
    atomic_write_text,
    psi_tau,
)
from .changepoint import decide
from .estimators import local_whittle, split_whittle
from .sim import GaussianModel, simulate, simulate_many
from .stats import StatisticKind, compute_many
from .subordinate import FoldedNormalScore, SplitSquareScore, Subordinator

__all__ = [
    "PHI3_MOMENT_RATIO",
    "ChangeSpec",
    "LocalAlternative",
    "MeanShiftARE",
    "PowerTable",
    "Scenario",
    "are_mean_shift_check",
    "are_mean_variance",
    "fstar",
    "inject_change",
    "inject_change_many",
    "local_alternative_g",
    "mean_shift_drift",
    "run_power_study",
]

# int phi^3 = 1 / (2 pi sqrt 3) and int phi^3 x^2 = 1 / (6 pi sqrt 3)
PHI3_INTEGRAL = 1.0 / (2.0 * math.pi * math.sqrt(3.0))
PHI3_X2_INTEGRAL = 1.0 / (6.0 * math.pi * math.sqrt(3.0))
PHI3_MOMENT_RATIO = PHI3_X2_INTEGRAL / PHI3_INTEGRAL

_POWER_STREAM = 3


# ---------------------------------------------------------------------------
# Change injection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChangeSpec:
    """Transforms before and after the change at fraction ``tau`` (``tau = 1``: none)."""

    pre: Subordinator
    post: Subordinator
    tau: float = 0.5
    label: str = ""

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise DomainError(f"tau must lie in (0, 1], got {self.tau}")

    @property
    def is_null(self) -> bool:
        return self.tau == 1.0 or self.pre is self.post or self.pre.describe() == self.post.describe()

    def describe(self) -> dict:
        return {"label": self.label, "pre": self.pre.describe(), "post": self.post.describe(), "tau": self.tau}

    @classmethod
    def null(cls) -> "ChangeSpec":
        G = Subordinator.identity()
        return cls(G, G, 1.0, "null")

    @classmethod
    def mean_shift(cls, mu: float = 1.0, tau: float = 0.5) -> "ChangeSpec":
        return cls(Subordinator.identity(), Subordinator.mean_shift(mu), tau, "mean_shift")

    @classmethod
    def mean_variance(cls, mu: float = 1.0, sigma2: float = 1.25, tau: float = 0.5) -> "ChangeSpec":
        return cls(Subordinator.identity(), Subordinator.affine(math.sqrt(sigma2), mu), tau, "mean_variance")

    @classmethod
    def chi_square(cls, a: float = 0.5, mu: float = 0.5, tau: float = 0.5) -> "ChangeSpec":
        """``x^2`` before, ``x^2 + a x + mu`` after."""
        return cls(Subordinator.square(), Subordinator.affine_square(1.0, a, mu), tau, "chi_square")

    @classmethod
    def split_square(cls, a_pos: float = 1.5, tau: float = 0.5) -> "ChangeSpec":
        """``x^2`` before, ``a x^2`` on the positive half-line after."""
        return cls(Subordinator.square(), Subordinator.split_square(a_pos, 1.0), tau, "split_square")

    @classmethod
    def rank_drop(cls, a_pos: float = 1.5, mu: float = 0.0, tau: float = 0.5) -> "ChangeSpec":
        """Normal-score pair whose Hermite rank drops from 2 to 1 at the change."""
        return cls(FoldedNormalScore(), SplitSquareScore(a_pos, mu), tau, "rank_drop")


def _apply(spec: ChangeSpec, X: np.ndarray) -> np.ndarray:
    n = X.shape[-1]
    pre = np.asarray(spec.pre(X), dtype=np.float64)
    if spec.is_null:
        return pre
    k = int(math.floor(n * spec.tau))
    post = np.asarray(spec.post(X), dtype=np.float64)
    return np.where(np.arange(n) < k, pre, post)


def inject_change(model: GaussianModel, spec: ChangeSpec, n: int, seed) -> np.ndarray:
    """Draw ``X`` from ``model`` once and apply ``spec.pre`` / ``spec.post`` around ``floor(n tau)``."""
    n = check_positive_int(n, "n", minimum=2)
    return _apply(spec, simulate(model, n, seed))


def inject_change_many(model: GaussianModel, spec: ChangeSpec, n: int, master_seed: int, indices, stream=()) -> np.ndarray:
    """Batch version of :func:`inject_change`; row ``r`` uses replicate index ``indices[r]``."""
    return _apply(spec, simulate_many(model, n, master_seed, indices, stream))


# ---------------------------------------------------------------------------
# Local alternatives
# ---------------------------------------------------------------------------


class AlternativeKind(str, Enum):
    MEAN_SHIFT = "mean_shift"
    VARIANCE_CHANGE = "variance_change"
    MEAN_VARIANCE = "mean_variance"
    MIXTURE = "mixture"
    CHI_SQUARE_SCALE = "chi_square_scale"


_RATES = {
    AlternativeKind.MEAN_SHIFT: "mu_n ~ C d_n / n",
    AlternativeKind.VARIANCE_CHANGE: "delta_n ~ C d_n / n with sigma_n = 1 / (1 - delta_n)",
    AlternativeKind.MEAN_VARIANCE: "mu_n ~ C1 d_n / n and (1 - 1/sigma_n) ~ C2 d_n / n",
    AlternativeKind.MIXTURE: "mixture weight delta_n ~ C d_n / n",
    AlternativeKind.CHI_SQUARE_SCALE: "(a_n - 1) ~ C d_{n,2} / n on the positive half-line",
}


@dataclass(frozen=True)
class LocalAlternative:
    """Limit drift ``g`` of ``(n / d_n)(F - F_(n))`` for a family of local alternatives.

    Parameters
    ----------
    kind : AlternativeKind or str
    C : float
        Drift constant (``C1`` for mean-variance alternatives).
    C2 : float
        Variance constant of the mean-variance alternative.
    G : Subordinator, optional
        Pre-change transform, standard normal by default; ``f_G`` and ``F``
        are its marginal density and cdf.
    other : distribution, optional
        Mixture component ``F*`` (anything with a ``cdf`` method).
    """

    kind: AlternativeKind
    C: float = 1.0
    C2: float = 0.0
    G: Subordinator | None = None
    other: object = None

    def __post_init__(self):
        object.__setattr__(self, "kind", AlternativeKind(self.kind))
        if self.kind is AlternativeKind.MIXTURE and self.other is None:
            raise ValueError("mixture alternatives need the component distribution `other`")

    @property
    def rate(self) -> str:
        return _RATES[self.kind]

    def g(self, x):
        return local_alternative_g(self, x)

    def total_variation(self, lo: float = -10.0, hi: float = 10.0, points: int = 20001) -> float:
        """Total variation of ``g`` on ``[lo, hi]`` from a fine grid."""
        return float(np.abs(np.diff(self.g(np.linspace(lo, hi, points)))).sum())


def local_alternative_g(alt: LocalAlternative, x):
    """Evaluate the drift function ``g(x)`` of ``alt``."""
    x = np.asarray(x, dtype=np.float64)
    G = alt.G or Subordinator.identity()
    if alt.kind is AlternativeKind.MEAN_SHIFT:
        out = alt.C * G.pdf(x)
    elif alt.kind is AlternativeKind.VARIANCE_CHANGE:
        out = alt.C * x * G.pdf(x)
    elif alt.kind is AlternativeKind.MEAN_VARIANCE:
        out = G.pdf(x) * (alt.C + alt.C2 * x)
    elif alt.kind is AlternativeKind.MIXTURE:
        out = alt.C * (np.asarray(alt.other.cdf(x)) - np.asarray(G.cdf(x)))
    else:
        r = np.sqrt(np.clip(x, 0.0, None))
        out = np.where(x >= 0.0, alt.C * r * np.exp(-0.5 * r * r) / math.sqrt(2.0 * math.pi), 0.0)
    out = np.asarray(out, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Power studies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """One row family of a power study.

    ``model`` is ``"fgn"`` (Hurst coefficient from the grid), ``"farima"``
    (``d = H - 1/2``), ``"farima10"`` (``d = H - 1/2`` plus ``a1``) or
    ``"ar1"`` (grid H ignored).  ``scale`` selects the normalization used with
    estimated H; ``None`` means ``"fgn"`` for fGn data and ``"estimated"``
    otherwise.
    """

    name: str
    change: ChangeSpec
    model: str = "fgn"
    a1: float = 0.0
    scale: str | None = None

    def latent(self, H: float) -> GaussianModel:
        if self.model == "fgn":
            return GaussianModel.fgn(H)
        if self.model == "farima":
            return GaussianModel.farima(H - 0.5)
        if self.model == "farima10":
            return GaussianModel.farima10(H - 0.5, self.a1)
        if self.model == "ar1":
            return GaussianModel.ar1(self.a1)
        raise ValueError(f"unknown model {self.model!r}")

    @property
    def scale_mode(self) -> str:
        if self.scale is not None:
            return self.scale
        return "fgn" if self.model == "fgn" else "estimated"

    @classmethod
    def preset(cls, name: str, mu: float = 1.0, tau: float = 0.5, sigma2: float = 1.25, model: str = "fgn", a1: float = 0.0):
        """Named scenarios: null, mean_shift, mean_variance, chi_square, split_square, rank_drop."""
        if name == "null":
            change = ChangeSpec.null()
        elif name == "mean_shift":
            change = ChangeSpec.mean_shift(mu, tau)
        elif name == "mean_variance":
            change = ChangeSpec.mean_variance(mu, sigma2, tau)
        elif name == "chi_square":
            change = ChangeSpec.chi_square(tau=tau)
        elif name == "chi_square_null":
            change = ChangeSpec(Subordinator.square(), Subordinator.square(), 1.0, "chi_square_null")
        elif name == "split_square":
            change = ChangeSpec.split_square(tau=tau)
        elif name == "rank_drop":
            change = ChangeSpec.rank_drop(mu=mu, tau=tau)
        else:
            raise ValueError(f"unknown scenario {name!r}")
        return cls(name, change, model, a1)


@dataclass
class PowerTable:
    """Empirical rejection rates, one row per (scenario, stat, hurst mode, n, H)."""

    rows: list = field(default_factory=list)
    reps: int = 0
    seed: int = DEFAULT_SEED

    def rate(self, scenario: str, stat, hurst_mode: str, n: int, H: float) -> float:
        stat = StatisticKind.parse(stat).value
        for row in self.rows:
            if (row["scenario"], row["stat"], row["hurst_mode"], row["n"]) == (scenario, stat, hurst_mode, n) and abs(
                row["H"] - H
            ) < 1e-12:
                return row["rate"]
        raise KeyError((scenario, stat, hurst_mode, n, H))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scenario", "stat", "hurst_mode", "n", "H", "rate", "reps"])
        for row in self.rows:
            writer.writerow(
                [row["scenario"], row["stat"], row["hurst_mode"], row["n"], repr(float(row["H"])), repr(float(row["rate"])), row["reps"]]
            )
        return buf.getvalue()

    def save(self, path) -> None:
        atomic_write_text(path, self.to_csv())


def _cell_stream(scenario: Scenario, n: int, H: float) -> tuple:
    return (_POWER_STREAM, zlib.crc32(scenario.name.encode()), n, int(round(H * 1_000_000)))


def _run_cell(scenario, stats, modes, n, H, reps, calibrator, alpha, master_seed):
    model = scenario.latent(H)
    Y = inject_change_many(model, scenario.change, n, master_seed, range(reps), _cell_stream(scenario, n, H))
    rejections = {(k, m): 0 for k in stats for m in modes}
    failures = {(k, m): 0 for k in stats for m in modes}
    for y in Y:
        raws = compute_many(y, stats)
        whittle = None
        if "whittle" in modes:
            try:
                whittle = local_whittle(y)
            except DegenerateInputError:
                whittle = None
        for kind in stats:
            for mode in modes:
                try:
                    if mode == "known":
                        hurst = model.hurst
                    elif mode == "whittle":
                        if whittle is None:
                            raise DegenerateInputError("local Whittle failed")
                        hurst = whittle
                    else:
                        hurst = split_whittle(y, kind, k_hat=raws[kind].argmax_k)
                    scale = "fgn" if mode == "known" else scenario.scale_mode
                    report = decide(y, raws[kind], alpha, hurst, calibrator, scale=scale)
                except (DegenerateInputError, DomainError):
                    failures[(kind, mode)] += 1
                    continue
                rejections[(kind, mode)] += report.reject
    rows = []
    for kind in stats:
        for mode in modes:
            ok = reps - failures[(kind, mode)]
            rows.append(
                {
                    "scenario": scenario.name,
                    "stat": kind.value,
                    "hurst_mode": mode,
                    "n": n,
                    "H": H,
                    "rate": rejections[(kind, mode)] / ok if ok else math.nan,
                    "reps": ok,
                    "failures": failures[(kind, mode)],
                }
            )
    return rows


def run_power_study(
    scenarios,
    statistics=("cvm", "wilcoxon", "cusum"),
    hurst_modes=("known",),
    ns=(100,),
    Hs=(0.6,),
    reps: int = 1000,
    J: int = 1000,
    master_seed: int = DEFAULT_SEED,
    alpha: float = 0.05,
    calibrator: NullCalibrator | None = None,
    n_jobs: int = 1,
) -> PowerTable:
    """Empirical rejection rates over a grid of scenarios, sample sizes and Hurst coefficients.

    Parameters
    ----------
    scenarios : iterable of Scenario or str
        Strings are expanded with :meth:`Scenario.preset`.
    statistics : iterable of statistic kinds
    hurst_modes : iterable of {"known", "whittle", "split"}
        ``known`` calibrates at the true Hurst coefficient of the latent model;
        the estimated modes calibrate at the per-series estimate by
        interpolation on the H-grid of step 0.01.  ``split`` uses the
        change-point estimate of the statistic being tested.
    ns, Hs : iterables
        Sample sizes and (latent) Hurst coefficients.
    reps : int
        Changed series per cell, at least 100.
    J : int
        Null replicates per calibration cell.
    master_seed : int
    alpha : float
    calibrator : NullCalibrator, optional
        Shared calibrator; created from ``J`` and ``master_seed`` if omitted.
    n_jobs : int
        Worker processes over cells (joblib); results do not depend on it.

    Returns
    -------
    PowerTable
        Rows carry a ``failures`` count of series whose Hurst estimation
        failed; those series are excluded from the rate.
    """
    if reps < 100:
        raise ValueError(f"reps must be >= 100, got {reps}")
    alpha = check_alpha(alpha)
    scenarios = [Scenario.preset(s) if isinstance(s, str) else s for s in scenarios]
    stats = [StatisticKind.parse(s) for s in statistics]
    modes = list(hurst_modes)
    for mode in modes:
        if mode not in ("known", "whittle", "split"):
            raise ValueError(f"unknown hurst mode {mode!r}")
    calibrator = calibrator or NullCalibrator(J, master_seed)
    cells = [(sc, n, H) for sc in scenarios for n in ns for H in Hs]
    if n_jobs == 1:
        results = [_run_cell(sc, stats, modes, n, H, reps, calibrator, alpha, master_seed) for sc, n, H in cells]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_cell)(sc, stats, modes, n, H, reps, calibrator, alpha, master_seed) for sc, n, H in cells
        )
    table = PowerTable(reps=reps, seed=master_seed)
    for rows in results:
        table.rows.extend(rows)
    return table


# ---------------------------------------------------------------------------
# Asymptotic relative efficiency
# ---------------------------------------------------------------------------


def _fstar(C1, C2, q, tau, kappa1, kappa2, step):
    count = int(round((kappa2 - kappa1) / step)) + 1
    psi = psi_tau(np.linspace(kappa1, kappa2, count), tau)
    base = q + C1 * psi
    extra = C2 * C2 * PHI3_MOMENT_RATIO * psi
    # rationalized (sqrt(A) - q) / psi - C1 with A = base^2 + extra * psi
    return C1 + float(np.min(extra / (np.sqrt(base * base + extra * psi) + base)))


def fstar(C1: float, C2: float, q: float, tau: float, kappa1: float, kappa2: float, step: float = 1e-4) -> float:
    """Equivalent mean-shift constant of a combined mean and variance change.

    Minimum over a ``step`` grid on ``[kappa1, kappa2]`` of
    ``(sqrt(q^2 + 2 q C1 psi + (C1^2 + C2^2 r) psi^2) - q) / psi`` with
    ``psi = psi_tau(t)`` and ``r = int phi^3 x^2 / int phi^3 = 1/3``.
    The expression is evaluated in rationalized form, so ``C2 = 0`` returns
    ``C1`` exactly.
    """
    if not 0.0 < kappa1 < 0.5 < kappa2 < 1.0:
        raise DomainError(f"need 0 < kappa1 < 1/2 < kappa2 < 1, got ({kappa1}, {kappa2})")
    if not C1 > 0 or C2 < 0 or not q > 0:
        raise DomainError("need C1 > 0, C2 >= 0 and q > 0")
    return _fstar(float(C1), float(C2), float(q), tau, kappa1, kappa2, step)


def are_mean_variance(
    C1_star: float, C2_star: float, q: float, tau: float, kappa1: float, kappa2: float, H: float, step: float = 1e-4
) -> float:
    """Lower bound on the efficiency of CvM relative to CUSUM under a mean and variance change.

    Solves ``fstar(C1, C1 C2*/C1*, ...) = C1*`` for ``C1`` in ``(0, C1*]`` by
    bisection (tolerance 1e-8) and returns ``(C1* / C1)^{1 / (1 - H)}``.
    """
    if not C1_star > 0 or not C2_star > 0:
        raise DomainError("need C1_star > 0 and C2_star > 0")
    fstar(C1_star, C2_star, q, tau, kappa1, kappa2, step)

    def gap(c1):
        return _fstar(c1, c1 * C2_star / C1_star, q, tau, kappa1, kappa2, step) - C1_star

    if gap(C1_star) <= 0.0:
        C1 = C1_star
    else:
        C1 = optimize.bisect(gap, 0.0, C1_star, xtol=1e-8 * max(1.0, C1_star), rtol=1e-15, maxiter=200)
    if not 0.0 < C1 <= C1_star:
        raise ArithmeticError(f"bisection left the bracket (0, {C1_star}]: {C1}")
    return (C1_star / C1) ** (1.0 / (1.0 - H))


@dataclass(frozen=True)
class MeanShiftARE:
    """Limit powers of KS, CvM, CUSUM, Wilcoxon and finite-sample powers."""

    limit: tuple
    finite: dict
    n: int
    mu: float

    def to_dict(self) -> dict:
        return asdict(self)


def are_mean_shift_check(
    H: float,
    tau: float = 0.5,
    C: float = 1.0,
    alpha: float = 0.05,
    reps: int = 10_000,
    seed: int = DEFAULT_SEED,
    n: int = 400,
    mu: float | None = None,
    finite_reps: int = 1000,
    J: int = 1000,
    calibrator: NullCalibrator | None = None,
) -> MeanShiftARE:
    """Compare the four tests under a mean shift in Gaussian data.

    Under the local alternative all four statistics share the limit
    ``sup|B~_H + C psi_tau|`` with the same quantile, so the limit power is one
    number repeated.  Finite-sample powers at ``n`` use a shift of size ``mu``
    (default ``C n^{H-1}``, the local rate) with known H.
    """
    limit = asymptotic_power(C, tau, H, alpha, reps, seed)
    mu = C * float(n) ** (H - 1.0) if mu is None else float(mu)
    table = run_power_study(
        [Scenario.preset("mean_shift", mu=mu, tau=tau)],
        statistics=tuple(StatisticKind),
        hurst_modes=("known",),
        ns=(n,),
        Hs=(H,),
        reps=finite_reps,
        J=J,
        master_seed=seed,
        alpha=alpha,
        calibrator=calibrator,
    )
    finite = {row["stat"]: row["rate"] for row in table.rows}
    return MeanShiftARE((limit,) * 4, finite, n, mu)


def mean_shift_drift(n: int, H: float, x, alt: LocalAlternative):
    """Finite-n drift ``(n / d_n)(F - F_(n))`` of a Gaussian mean-shift with ``mu_n = d_n / n``."""
    if alt.kind is not AlternativeKind.MEAN_SHIFT:
        raise NotImplementedError("finite-n drift is implemented for mean shifts")
    d = float(n) ** H
    mu_n = alt.C * d / n
    x = np.asarray(x, dtype=np.float64)
    return (n / d) * (special.ndtr(x) - special.ndtr(x - mu_n))
