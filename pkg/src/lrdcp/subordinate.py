"""Hermite expansions of indicator classes ``1{G(X) <= x}`` for Gaussian ``X``.

A :class:`Subordinator` is a transform ``G`` together with two pieces of
analytic metadata: ``region(x)``, the set ``{s : G(s) <= x}`` as sorted
disjoint intervals, and an independently derived marginal ``cdf``.  With the
region known, the Hermite coefficient ``J_q(x) = E[1{G(X) <= x} H_q(X)]`` is a
one-dimensional integral of ``H_q(s) phi(s)`` over a few intervals, computed by
adaptive Gauss-Legendre quadrature.

Hermite polynomials follow the probabilists' convention, ``E[H_q(X)^2] = q!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from ._validation import DomainError, check_positive_int
from .sim import GaussianModel, SeedSpec, as_seed, autocov_vector, simulate

__all__ = [
    "CUTOFF",
    "HermiteInfo",
    "Normalization",
    "RankError",
    "Subordinator",
    "hermite_coeff",
    "hermite_coeffs",
    "hermite_poly",
    "hermite_poly_all",
    "hermite_rank",
    "long_memory_D",
    "normalization_dn",
    "reduction_residual",
    "slowly_varying_constant",
]

CUTOFF = 8.5
RANK_THRESHOLD = 1e-6
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
_TRAPEZOID_STEP = 1e-4


class RankError(ValueError):
    """No Hermite coefficient up to ``qmax`` is distinguishable from zero."""


# ---------------------------------------------------------------------------
# Hermite polynomials and coefficient integrals
# ---------------------------------------------------------------------------


def hermite_poly(q: int, x):
    """Probabilists' Hermite polynomial ``H_q(x)`` for ``0 <= q <= 50``."""
    if not 0 <= q <= 50:
        raise ValueError(f"Hermite order must lie in [0, 50], got {q}")
    x = np.asarray(x, dtype=np.float64)
    out = hermite_poly_all(q, x)[q]
    return float(out) if out.ndim == 0 else out


def hermite_poly_all(qmax: int, x) -> np.ndarray:
    """Stack ``[H_0(x), ..., H_qmax(x)]`` along a new leading axis."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((qmax + 1,) + x.shape)
    out[0] = 1.0
    if qmax >= 1:
        out[1] = x
    for q in range(1, qmax):
        out[q + 1] = x * out[q] - q * out[q - 1]
    return out


def _gl_panel(a: float, b: float, qmax: int) -> np.ndarray:
    half = 0.5 * (b - a)
    s = 0.5 * (a + b) + half * _GL_NODES
    vals = hermite_poly_all(qmax, s) * (np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi))
    return half * (vals @ _GL_WEIGHTS)


def _adaptive_gl(a: float, b: float, qmax: int, tol: float, depth: int = 0) -> np.ndarray:
    whole = _gl_panel(a, b, qmax)
    mid = 0.5 * (a + b)
    halves = _gl_panel(a, mid, qmax) + _gl_panel(mid, b, qmax)
    if depth >= 30 or np.max(np.abs(whole - halves)) <= tol:
        return halves
    return _adaptive_gl(a, mid, qmax, tol / 2, depth + 1) + _adaptive_gl(mid, b, qmax, tol / 2, depth + 1)


def _integrate_intervals(intervals, qmax: int, tol: float = 1e-12) -> np.ndarray:
    total = np.zeros(qmax + 1)
    for lo, hi in intervals:
        lo, hi = max(lo, -CUTOFF), min(hi, CUTOFF)
        if hi <= lo:
            continue
        # unit-width starting panels keep the adaptive error estimate honest
        edges = np.linspace(lo, hi, max(1, int(math.ceil(hi - lo))) + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            total += _adaptive_gl(a, b, qmax, tol)
    return total


def _trapezoid_coeffs(G, x: float, qmax: int) -> np.ndarray:
    s = np.arange(-CUTOFF, CUTOFF + _TRAPEZOID_STEP / 2, _TRAPEZOID_STEP)
    weight = (np.asarray(G(s)) <= x) * np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi)
    return np.trapezoid(hermite_poly_all(qmax, s) * weight, s, axis=1)


# ---------------------------------------------------------------------------
# Subordinators
# ---------------------------------------------------------------------------


class Subordinator:
    """Measurable transform ``G`` of a standard normal variable.

    Subclasses implement ``__call__``, ``region`` and ``cdf``; ``region``
    returning ``None`` marks a transform without an analytic level-set solver,
    in which case Hermite coefficients fall back to a dense trapezoid rule.
    """

    name = "generic"

    def __call__(self, s):
        raise NotImplementedError

    def region(self, x: float):
        return None

    def cdf(self, x):
        """Marginal distribution function of ``G(X)``."""
        x = np.asarray(x, dtype=np.float64)
        out = np.vectorize(lambda v: _trapezoid_coeffs(self, v, 0)[0])(x)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        h = 1e-5 * np.maximum(1.0, np.abs(x))
        return (np.asarray(self.cdf(x + h)) - np.asarray(self.cdf(x - h))) / (2 * h)

    def ppf(self, p):
        """Marginal quantile function, inverting the trapezoid ``cdf``.

        ``G`` is evaluated once on the trapezoid nodes; the values sorted with
        their quadrature weights give the generalized inverse of that ``cdf``.
        """
        p = np.asarray(p, dtype=np.float64)
        s = np.arange(-CUTOFF, CUTOFF + _TRAPEZOID_STEP / 2, _TRAPEZOID_STEP)
        w = np.exp(-0.5 * s * s) / math.sqrt(2.0 * math.pi) * _TRAPEZOID_STEP
        w[[0, -1]] *= 0.5
        vals = np.asarray(self(s), dtype=np.float64)
        order = np.argsort(vals, kind="stable")
        vals, cum = vals[order], np.cumsum(w[order])
        idx = np.minimum(np.searchsorted(cum, p * cum[-1], side="left"), vals.shape[0] - 1)
        out = vals[idx]
        return float(out) if out.ndim == 0 else out

    def region_measure(self, x: float) -> float:
        """Standard normal measure of ``region(x)``."""
        intervals = self.region(x)
        if intervals is None:
            raise ValueError(f"{self.name} has no analytic region solver")
        return float(sum(special.ndtr(hi) - special.ndtr(lo) for lo, hi in intervals))

    def describe(self) -> dict:
        return {"kind": self.name}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "kind")
        return f"{type(self).__name__}({params})"

    # Named constructors mirroring the change library.
    @staticmethod
    def identity() -> "Affine":
        return Affine(1.0, 0.0, name="identity")

    @staticmethod
    def mean_shift(mu: float) -> "Affine":
        return Affine(1.0, mu, name="mean_shift")

    @staticmethod
    def scale(sigma: float) -> "Affine":
        return Affine(sigma, 0.0, name="scale")

    @staticmethod
    def affine(sigma: float, mu: float) -> "Affine":
        return Affine(sigma, mu)

    @staticmethod
    def square() -> "AffineSquare":
        return AffineSquare(1.0, 0.0, 0.0, name="square")

    @staticmethod
    def affine_square(a: float, b: float, c: float) -> "AffineSquare":
        return AffineSquare(a, b, c)

    @staticmethod
    def split_square(a_pos: float, a_neg: float) -> "SplitSquare":
        return SplitSquare(a_pos, a_neg)

    @staticmethod
    def quantile_transform(dist) -> "QuantileTransform":
        return QuantileTransform(dist)

    @staticmethod
    def from_callable(func) -> "Generic":
        return Generic(func)


class Affine(Subordinator):
    """``G(s) = sigma * s + mu`` with ``sigma > 0``."""

    def __init__(self, sigma: float = 1.0, mu: float = 0.0, name: str = "affine"):
        if not sigma > 0:
            raise DomainError(f"sigma must be positive, got {sigma!r}")
        self.sigma = float(sigma)
        self.mu = float(mu)
        self.name = name

    def __call__(self, s):
        return self.sigma * np.asarray(s, dtype=np.float64) + self.mu

    def region(self, x):
        return [(-math.inf, (x - self.mu) / self.sigma)] if x > -math.inf else []

    def cdf(self, x):
        return stats.norm.cdf(x, loc=self.mu, scale=self.sigma)

    def pdf(self, x):
        return stats.norm.pdf(x, loc=self.mu, scale=self.sigma)

    def ppf(self, p):
        return stats.norm.ppf(p, loc=self.mu, scale=self.sigma)

    def describe(self):
        return {"kind": self.name, "sigma": self.sigma, "mu": self.mu}


class AffineSquare(Subordinator):
    """``G(s) = a s^2 + b s + c``."""

    def __init__(self, a: float, b: float, c: float, name: str = "affine_square"):
        self.a, self.b, self.c = float(a), float(b), float(c)
        self.name = name
        if self.a == 0.0 and self.b == 0.0:
            raise DomainError("a and b cannot both vanish")

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        return self.a * s * s + self.b * s + self.c

    def _vertex(self):
        h = self.b / (2.0 * self.a)
        return h, self.c - self.b * self.b / (4.0 * self.a)

    def region(self, x):
        if not math.isfinite(x):
            return [] if x < 0 else [(-math.inf, math.inf)]
        if self.a == 0.0:
            cut = (x - self.c) / self.b
            return [(-math.inf, cut)] if self.b > 0 else [(cut, math.inf)]
        h, k = self._vertex()
        t = (x - k) / self.a
        if self.a > 0:
            if t < 0:
                return []
            r = math.sqrt(t)
            return [(-h - r, -h + r)]
        if t <= 0:
            return [(-math.inf, math.inf)]
        r = math.sqrt(t)
        return [(-math.inf, -h - r), (-h + r, math.inf)]

    def _chi2(self):
        h, _ = self._vertex()
        return stats.chi2(1) if h == 0.0 else stats.ncx2(1, h * h)

    def _chi2_cdf(self, t):
        h, _ = self._vertex()
        return special.chdtr(1, t) if h == 0.0 else special.chndtr(t, 1, h * h)

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.a == 0.0:
            z = (x - self.c) / self.b
            out = special.ndtr(z) if self.b > 0 else special.ndtr(-z)
        else:
            _, k = self._vertex()
            t = np.maximum((x - k) / self.a, 0.0)
            F = self._chi2_cdf(t)
            if self.a > 0:
                out = np.where(x >= k, F, 0.0)
            else:
                out = np.where(x <= k, 1.0 - F, 1.0)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.a == 0.0:
            return stats.norm.pdf((x - self.c) / self.b) / abs(self.b)
        _, k = self._vertex()
        t = (x - k) / self.a
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(t > 0, self._chi2().pdf(np.abs(t)) / abs(self.a), 0.0)
        return out

    def ppf(self, p):
        p = np.asarray(p, dtype=np.float64)
        if self.a == 0.0:
            z = special.ndtri(p if self.b > 0 else 1.0 - p)
            return self.c + self.b * z
        _, k = self._vertex()
        return k + self.a * self._chi2().ppf(p if self.a > 0 else 1.0 - p)

    def describe(self):
        return {"kind": self.name, "a": self.a, "b": self.b, "c": self.c}


class SplitSquare(Subordinator):
    """``G(s) = a_pos s^2 1{s >= 0} + a_neg s^2 1{s < 0}`` with positive weights."""

    name = "split_square"

    def __init__(self, a_pos: float, a_neg: float):
        if not (a_pos > 0 and a_neg > 0):
            raise DomainError("split-square weights must be positive")
        self.a_pos, self.a_neg = float(a_pos), float(a_neg)

    def __call__(self, s):
        s = np.asarray(s, dtype=np.float64)
        return np.where(s >= 0, self.a_pos, self.a_neg) * s * s

    def region(self, x):
        if x < 0:
            return []
        if x == math.inf:
            return [(-math.inf, math.inf)]
        return [(-math.sqrt(x / self.a_neg), math.sqrt(x / self.a_pos))]

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        xp = np.maximum(x, 0.0)
        out = np.where(x >= 0, 0.5 * (special.chdtr(1, xp / self.a_pos) + special.chdtr(1, xp / self.a_neg)), 0.0)
        return float(out) if out.ndim == 0 else out

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        xp = np.maximum(x, 1e-300)
        return np.where(
            x > 0,
            0.5 * (stats.chi2.pdf(xp / self.a_pos, 1) / self.a_pos + stats.chi2.pdf(xp / self.a_neg, 1) / self.a_neg),
            0.0,
        )

    def describe(self):
        return {"kind": self.name, "a_pos": self.a_pos, "a_neg": self.a_neg}


class QuantileTransform(Subordinator):
    """``G = F^{-1} o Phi`` for a continuous target distribution ``F``.

    ``dist`` needs ``cdf``, ``ppf`` and ``pdf`` methods; frozen ``scipy.stats``
    distributions and :class:`MixtureDistribution` both qualify.
    """

    name = "quantile_transform"

    def __init__(self, dist):
        self.dist = dist

    def __call__(self, s):
        return self.dist.ppf(special.ndtr(np.asarray(s, dtype=np.float64)))

    def region(self, x):
        F = float(self.dist.cdf(x))
        if F <= 0.0:
            return []
        return [(-math.inf, float(special.ndtri(F)))]

    def cdf(self, x):
        return self.dist.cdf(x)

    def pdf(self, x):
        return self.dist.pdf(x)

    def ppf(self, p):
        return self.dist.ppf(p)

    def describe(self):
        return {"kind": self.name, "dist": repr(self.dist)}


class MixtureDistribution:
    """Two-component mixture ``(1 - w) F + w F*`` of continuous distributions."""

    def __init__(self, base, other, weight: float):
        if not 0.0 <= weight <= 1.0:
            raise DomainError("mixture weight must lie in [0, 1]")
        self.base, self.other, self.weight = base, other, float(weight)

    def cdf(self, x):
        return (1.0 - self.weight) * self.base.cdf(x) + self.weight * self.other.cdf(x)

    def pdf(self, x):
        return (1.0 - self.weight) * self.base.pdf(x) + self.weight * self.other.pdf(x)

    def ppf(self, p):
        p = np.asarray(p, dtype=np.float64)
        lo = np.minimum(self.base.ppf(1e-16), self.other.ppf(1e-16))
        hi = np.maximum(self.base.ppf(1 - 1e-16), self.other.ppf(1 - 1e-16))

        def solve(level):
            if level <= 0.0:
                return -math.inf
            if level >= 1.0:
                return math.inf
            return optimize.brentq(lambda x: self.cdf(x) - level, lo, hi, xtol=1e-13)

        out = np.vectorize(solve)(p)
        return float(out) if out.ndim == 0 else out

    def __repr__(self):
        return f"MixtureDistribution(weight={self.weight})"


class FoldedNormalScore(Subordinator):
    """``G(s) = Phi^{-1}(2 Phi(|s|) - 1)``: standard normal marginal, Hermite rank 2."""

    name = "folded_normal_score"

    def __call__(self, s):
        return special.ndtri(special.erf(np.abs(np.asarray(s, dtype=np.float64)) / math.sqrt(2.0)))

    def region(self, x):
        if x == -math.inf:
            return []
        t = float(special.ndtri(0.5 * (1.0 + special.ndtr(x))))
        return [(-t, t)]

    def cdf(self, x):
        return special.ndtr(x)

    def pdf(self, x):
        return stats.norm.pdf(x)

    def ppf(self, p):
        return special.ndtri(p)


class SplitSquareScore(Subordinator):
    """``G(s) = Phi^{-1}(F*(G*(s))) + mu`` with ``G*`` a :class:`SplitSquare`.

    Normal marginal ``N(mu, 1)`` but Hermite rank 1 whenever ``a_pos != 1``;
    this is the post-change transform of the multiple-Hermite-process example.
    """

    name = "split_square_score"

    def __init__(self, a_pos: float, mu: float = 0.0):
        self.inner = SplitSquare(a_pos, 1.0)
        self.mu = float(mu)

    def __call__(self, s):
        F = self.inner.cdf(self.inner(s))
        return special.ndtri(np.clip(F, 0.0, 1.0)) + self.mu

    def region(self, x):
        if x == math.inf:
            return [(-math.inf, math.inf)]
        level = float(special.ndtr(x - self.mu))
        if level <= 0.0:
            return []
        if level >= 1.0:
            return [(-math.inf, math.inf)]
        return self.inner.region(float(self.inner.ppf(level)))

    def cdf(self, x):
        return special.ndtr(np.asarray(x, dtype=np.float64) - self.mu)

    def pdf(self, x):
        return stats.norm.pdf(np.asarray(x, dtype=np.float64) - self.mu)

    def ppf(self, p):
        return special.ndtri(p) + self.mu

    def describe(self):
        return {"kind": self.name, "a_pos": self.inner.a_pos, "mu": self.mu}


class Generic(Subordinator):
    """Arbitrary vectorized callable with a numerical level-set solver.

    ``region(x)`` brackets the crossings of ``G(s) = x`` on a grid of step
    1e-3 over ``[-8.5, 8.5]`` and refines them with Brent's method.  Level sets
    are assumed to have no two crossings inside one grid cell.  It returns
    ``None`` (trapezoid fallback) when ``G`` is not finite on the grid or
    crosses the level more than ``max_crossings`` times.
    """

    name = "generic"
    max_crossings = 200

    def __init__(self, func):
        self.func = func
        self._grid = None

    def __call__(self, s):
        return self.func(np.asarray(s, dtype=np.float64))

    def region(self, x: float):
        if self._grid is None:
            s = np.linspace(-CUTOFF, CUTOFF, 17001)
            self._grid = (s, np.asarray(self(s), dtype=np.float64))
        s, g = self._grid
        if not np.all(np.isfinite(g)):
            return None
        inside = g <= x
        cells = np.flatnonzero(inside[1:] != inside[:-1])
        if cells.shape[0] > self.max_crossings:
            return None
        f = lambda t: float(self(np.array([t]))[0]) - x  # noqa: E731
        roots = []
        for i in cells:
            lo, hi = f(s[i]), f(s[i + 1])
            if lo == 0.0 or hi == 0.0:
                roots.append(float(s[i] if lo == 0.0 else s[i + 1]))
            else:
                roots.append(optimize.brentq(f, s[i], s[i + 1], xtol=1e-14, rtol=1e-15))
        edges = [-math.inf] + roots + [math.inf]
        state = bool(inside[0])
        out = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if state:
                out.append((lo, hi))
            state = not state
        return out


def _coeffs_with_method(G: Subordinator, qmax: int, x: float):
    intervals = G.region(x)
    if intervals is None:
        return _trapezoid_coeffs(G, x, qmax), "trapezoid"
    return _integrate_intervals(intervals, qmax), "gauss_legendre"


def hermite_coeffs(G: Subordinator, qmax: int, x: float, return_method: bool = False):
    """Coefficients ``[J_0(x), ..., J_qmax(x)]`` of ``1{G(X) <= x}``."""
    vals, method = _coeffs_with_method(G, qmax, float(x))
    return (vals, method) if return_method else vals


def hermite_coeff(G: Subordinator, q: int, x: float, return_method: bool = False):
    """Hermite coefficient ``J_q(x) = E[1{G(X) <= x} H_q(X)]``.

    Integrates ``H_q(s) phi(s)`` over ``G.region(x)`` clipped to ``[-8.5, 8.5]``
    with adaptive 20-point Gauss-Legendre panels (absolute target 1e-10).
    Transforms without a region solver use a trapezoid rule with step 1e-4;
    ``return_method=True`` reports which path produced the value.
    """
    vals, method = _coeffs_with_method(G, q, float(x))
    return (float(vals[q]), method) if return_method else float(vals[q])


def _coeff_table(G: Subordinator, qmax: int, grid) -> np.ndarray:
    return np.stack([hermite_coeffs(G, qmax, x) for x in grid], axis=1)


@dataclass(frozen=True)
class HermiteInfo:
    """Hermite rank of ``{1{G(.) <= x}}_x`` and the evidence used to certify it."""

    rank: int
    qmax_scanned: int
    grid: np.ndarray = field(repr=False)
    grid_sup: np.ndarray
    subordinator: Subordinator = field(repr=False)

    def coefficient(self, q: int, x: float) -> float:
        return hermite_coeff(self.subordinator, q, x)


def hermite_rank(G: Subordinator, qmax: int = 4) -> HermiteInfo:
    """Smallest ``q <= qmax`` whose coefficient exceeds 1e-6 somewhere on the grid.

    The grid is 201 marginal quantiles of ``G(X)`` at levels 0.005, ..., 0.995.
    """
    qmax = check_positive_int(qmax, "qmax")
    grid = np.asarray(G.ppf(np.linspace(0.005, 0.995, 201)), dtype=np.float64)
    table = _coeff_table(G, qmax, grid)
    sup = np.abs(table).max(axis=1)
    for q in range(1, qmax + 1):
        if sup[q] > RANK_THRESHOLD:
            return HermiteInfo(q, qmax, grid, sup, G)
    raise RankError(f"Hermite rank of {G!r} exceeds qmax={qmax}")


# ---------------------------------------------------------------------------
# Normalization d_{n,m}
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Normalization:
    """Scale ``d_{n,m}`` of partial sums of ``H_m(X_i)``.

    ``H`` is the effective Hurst coefficient ``1 - m D / 2``.
    """

    n: int
    m: int
    H: float
    L_const: float
    value: float
    source: str

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "H": self.H, "L_const": self.L_const, "value": self.value, "source": self.source}


def long_memory_D(model: GaussianModel) -> float:
    """Decay exponent ``D`` of ``rho(k) ~ C k^{-D}``."""
    if model.kind == "fgn":
        return 2.0 - 2.0 * model.H
    if model.kind == "ar1":
        raise DomainError("AR(1) is short-range dependent; no long-memory exponent D exists")
    return 1.0 - 2.0 * model.d


def slowly_varying_constant(model: GaussianModel) -> float:
    """Limit ``C`` of ``rho(k) k^D`` (the slowly varying part treated as constant)."""
    if model.kind == "fgn":
        return model.H * (2.0 * model.H - 1.0)
    if model.kind == "ar1":
        raise DomainError("AR(1) is short-range dependent")
    d = model.d
    C = math.exp(special.gammaln(1.0 - d) - special.gammaln(d))
    if model.kind == "farima00":
        return C
    a = model.a1
    h = np.arange(-200, 201)
    rho_in = np.exp(
        special.gammaln(np.abs(h) + d) + special.gammaln(1 - d) - special.gammaln(np.abs(h) - d + 1) - special.gammaln(d)
    )
    var_ratio = float((a ** np.abs(h) * rho_in).sum())
    return C * (1 + a) / ((1 - a) * var_ratio)


def normalization_dn(n: int, m: int, model: GaussianModel, mode: str = "auto", L_const: float | None = None) -> Normalization:
    """Compute ``d_{n,m}`` with ``d_{n,m}^2 = Var(sum_{i<=n} H_m(X_i))``.

    Parameters
    ----------
    n, m : int
        Sample size and Hermite order; ``m D < 1`` is required.
    model : GaussianModel
    mode : {"exact", "asymptotic", "auto"}
        ``exact`` evaluates ``m! sum_{i,j} rho(i-j)^m``; ``asymptotic`` uses
        ``2 m! / ((1 - mD)(2 - mD)) n^{2 - mD} L^m``; ``auto`` is exact up to
        ``n = 8192``.
    L_const : float, optional
        Constant of the slowly varying part; defaults to the model's limit.
    """
    n = check_positive_int(n, "n")
    m = check_positive_int(m, "m")
    D = long_memory_D(model)
    if not (0.0 < m * D < 1.0):
        raise DomainError(f"long-memory condition 0 < m*D < 1 violated (m={m}, D={D:.4g})")
    H_eff = 1.0 - m * D / 2.0
    if L_const is None:
        L_const = slowly_varying_constant(model)
    if mode == "auto":
        mode = "exact" if n <= 8192 else "asymptotic"
    if mode == "exact":
        rho = autocov_vector(model, n)
        k = np.arange(1, n)
        d2 = math.factorial(m) * (n + 2.0 * np.sum((n - k) * rho[1:] ** m))
        source = "exact_double_sum"
    elif mode == "asymptotic":
        d2 = 2.0 * math.factorial(m) / ((1 - m * D) * (2 - m * D)) * n ** (2 - m * D) * L_const**m
        source = "asymptotic_formula"
    else:
        raise ValueError(f"unknown normalization mode {mode!r}")
    return Normalization(n, m, H_eff, float(L_const), math.sqrt(d2), source)


# ---------------------------------------------------------------------------
# Reduction principle
# ---------------------------------------------------------------------------


def reduction_residual(
    model: GaussianModel,
    G: Subordinator,
    m: int,
    n: int,
    reps: int,
    seed=0,
    truncation: int | None = None,
    grid_size: int = 101,
    return_samples: bool = False,
):
    """Monte Carlo mean of the sup-norm reduction remainder.

    For each replicate computes
    ``max_{l <= n, x in grid} |d_{n,m}^{-1} sum_{j<=l} (1{G(X_j) <= x} - sum_{q<=t} J_q(x)/q! H_q(X_j))|``
    where ``t = truncation`` (default ``m``) and the grid holds ``grid_size``
    marginal quantiles of ``G(X)``.
    """
    reps = check_positive_int(reps, "reps")
    t = m if truncation is None else int(truncation)
    d = normalization_dn(n, m, model).value
    grid = np.asarray(G.ppf(np.linspace(0.005, 0.995, grid_size)), dtype=np.float64)
    J = _coeff_table(G, t, grid)
    weights = J / np.array([math.factorial(q) for q in range(t + 1)])[:, None]
    seed = as_seed(seed)
    out = np.empty(reps)
    for r in range(reps):
        X = simulate(model, n, SeedSpec(seed.master_seed, r, seed.stream))
        Y = np.asarray(G(X))
        approx = weights.T @ hermite_poly_all(t, X)
        resid = np.cumsum((Y[None, :] <= grid[:, None]) - approx, axis=1)
        out[r] = np.abs(resid).max() / d
    return out if return_samples else float(out.mean())
