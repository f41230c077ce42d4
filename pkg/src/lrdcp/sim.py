"""Exact-covariance simulation of stationary Gaussian sequences.

Four latent models are supported: fractional Gaussian noise, FARIMA(0, d, 0),
FARIMA(1, d, 0) and AR(1).  Every model is standardized to zero mean and unit
marginal variance.  FGN and FARIMA(0, d, 0) are drawn by circulant embedding,
the two models with an autoregressive part by filtering a long-memory (or
white) input with a burn-in and dividing by the theoretical standard deviation.

Randomness is counter based: a :class:`SeedSpec` (master seed, stream,
replicate index) maps to one independent ``numpy`` generator, so replicate
loops give the same numbers regardless of execution order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg, signal
from scipy.special import gammaln

from ._validation import DomainError, check_hurst, check_positive_int

__all__ = [
    "EmbeddingError",
    "GaussianModel",
    "SeedSpec",
    "as_seed",
    "autocov_vector",
    "fgn_autocov",
    "model_autocov",
    "simulate",
    "simulate_many",
]

_EIG_TOL = 1e-10
_CHOLESKY_MAX_N = 2048


class EmbeddingError(RuntimeError):
    """The circulant embedding of an autocovariance is not nonnegative definite."""


@dataclass(frozen=True)
class GaussianModel:
    """Latent stationary Gaussian process with unit marginal variance.

    Use the constructors :meth:`fgn`, :meth:`farima`, :meth:`farima10` and
    :meth:`ar1` rather than filling the fields by hand.
    """

    kind: str
    H: float | None = None
    d: float | None = None
    a1: float | None = None

    def __post_init__(self):
        if self.kind == "fgn":
            check_hurst(self.H)
        elif self.kind in ("farima00", "farima10"):
            if self.d is None or not (0.0 < self.d < 0.5):
                raise DomainError(f"FARIMA memory parameter d must lie in (0, 0.5), got {self.d!r}")
        elif self.kind != "ar1":
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind in ("farima10", "ar1"):
            if self.a1 is None or not (-1.0 < self.a1 < 1.0):
                raise DomainError(f"AR coefficient must lie in (-1, 1), got {self.a1!r}")

    @classmethod
    def fgn(cls, H: float) -> "GaussianModel":
        return cls("fgn", H=float(H))

    @classmethod
    def farima(cls, d: float) -> "GaussianModel":
        return cls("farima00", d=float(d))

    @classmethod
    def farima10(cls, d: float, a1: float) -> "GaussianModel":
        return cls("farima10", d=float(d), a1=float(a1))

    @classmethod
    def ar1(cls, a1: float) -> "GaussianModel":
        return cls("ar1", a1=float(a1))

    @property
    def hurst(self) -> float:
        """Hurst coefficient of the model (0.5 for the short-memory AR(1))."""
        if self.kind == "fgn":
            return self.H
        if self.kind == "ar1":
            return 0.5
        return self.d + 0.5

    def describe(self) -> dict:
        return {k: v for k, v in (("kind", self.kind), ("H", self.H), ("d", self.d), ("a1", self.a1)) if v is not None}


@dataclass(frozen=True)
class SeedSpec:
    """Address of one random stream.

    ``stream`` namespaces independent experiments (a calibration key, a study
    cell) under the same master seed; ``replicate_index`` counts replicates.
    """

    master_seed: int
    replicate_index: int = 0
    stream: tuple = field(default=())

    def __post_init__(self):
        if self.master_seed < 0 or self.master_seed >= 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be >= 0")

    def rng(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=tuple(self.stream) + (self.replicate_index,))
        return np.random.default_rng(seq)


def as_seed(seed) -> SeedSpec:
    """Coerce an int or :class:`SeedSpec` into a :class:`SeedSpec`."""
    if isinstance(seed, SeedSpec):
        return seed
    return SeedSpec(int(seed))


def fgn_autocov(H: float, k):
    """Autocovariance of unit-variance fractional Gaussian noise at lag ``k``."""
    H = check_hurst(H)
    k = np.abs(np.asarray(k, dtype=np.float64))
    h2 = 2.0 * H
    out = 0.5 * (np.abs(k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)
    return float(out) if out.ndim == 0 else out


def _farima_acf(d: float, kmax: int) -> np.ndarray:
    # rho(k) = rho(k-1) (k-1+d)/(k-d), written in closed form to avoid a long product
    k = np.arange(kmax + 1, dtype=np.float64)
    log_rho = gammaln(k + d) + gammaln(1.0 - d) - gammaln(k - d + 1.0) - gammaln(d)
    return np.exp(log_rho)


def _ar_filter_acf(rho_in: np.ndarray, a: float, kmax: int) -> np.ndarray:
    """Standardized autocorrelation of an AR(1) filter applied to input acf ``rho_in``."""
    hmax = _filter_hmax(a)
    if rho_in.shape[0] <= kmax + hmax:
        raise ValueError("input autocorrelation too short for the filter truncation")
    h = np.arange(-hmax, hmax + 1)
    weights = a ** np.abs(h)
    lags = np.abs(np.arange(kmax + 1)[:, None] - h[None, :])
    gamma = (rho_in[lags] * weights[None, :]).sum(axis=1)
    return gamma / gamma[0]


def _filter_hmax(a: float) -> int:
    return 0 if a == 0.0 else int(math.ceil(math.log(1e-18) / math.log(abs(a))))


def autocov_vector(model: GaussianModel, n: int) -> np.ndarray:
    """Autocovariances ``rho(0), ..., rho(n-1)`` of ``model`` (``rho(0) = 1``)."""
    n = check_positive_int(n, "n")
    if model.kind == "fgn":
        return fgn_autocov(model.H, np.arange(n))
    if model.kind == "ar1":
        return model.a1 ** np.arange(n, dtype=np.float64)
    if model.kind == "farima00":
        return _farima_acf(model.d, n - 1)
    hmax = _filter_hmax(model.a1)
    rho_in = _farima_acf(model.d, n + hmax)
    return _ar_filter_acf(rho_in, model.a1, n - 1)


def model_autocov(model: GaussianModel, k: int) -> float:
    """Autocovariance of the standardized model at lag ``k >= 0``."""
    if k < 0:
        raise ValueError("lag must be >= 0")
    if model.kind == "fgn":
        return fgn_autocov(model.H, k)
    return float(autocov_vector(model, int(k) + 1)[k])


def _burn_in(a1: float) -> int:
    return max(100, 10 * int(math.ceil(1.0 / (1.0 - abs(a1)))))


@lru_cache(maxsize=64)
def _embedding(model: GaussianModel, n: int):
    """Return ``("circulant", sqrt(eigenvalues / M))`` or ``("cholesky", L)``."""
    rho = autocov_vector(model, n)
    if n == 1:
        return "cholesky", np.ones((1, 1))
    row = np.concatenate([rho, rho[-2:0:-1]])
    lam = np.fft.fft(row).real
    M = row.shape[0]
    if lam.min() >= -_EIG_TOL * max(1.0, lam.max()):
        return "circulant", np.sqrt(np.clip(lam, 0.0, None) / M)
    if n <= _CHOLESKY_MAX_N:
        return "cholesky", linalg.cholesky(linalg.toeplitz(rho), lower=True)
    raise EmbeddingError(
        f"circulant embedding for {model.describe()} at n={n} has eigenvalue {lam.min():.3g} < 0"
    )


def _long_memory_draw(model: GaussianModel, n: int, rngs) -> np.ndarray:
    method, factor = _embedding(model, n)
    if method == "circulant":
        M = factor.shape[0]
        z = np.empty((len(rngs), M), dtype=np.complex128)
        for r, rng in enumerate(rngs):
            z[r].real = rng.standard_normal(M)
            z[r].imag = rng.standard_normal(M)
        return np.fft.fft(factor * z, axis=1).real[:, :n]
    z = np.stack([rng.standard_normal(n) for rng in rngs])
    return z @ factor.T


def _draw(model: GaussianModel, n: int, rngs) -> np.ndarray:
    if model.kind in ("fgn", "farima00"):
        return _long_memory_draw(model, n, rngs)
    burn = _burn_in(model.a1)
    total = n + burn
    if model.kind == "ar1":
        innov = np.stack([rng.standard_normal(total) for rng in rngs])
        var = 1.0 / (1.0 - model.a1**2)
    else:
        innov = _long_memory_draw(GaussianModel.farima(model.d), total, rngs)
        hmax = _filter_hmax(model.a1)
        rho_in = _farima_acf(model.d, hmax + 1)
        h = np.arange(-hmax, hmax + 1)
        var = float((model.a1 ** np.abs(h) * rho_in[np.abs(h)]).sum()) / (1.0 - model.a1**2)
    out = signal.lfilter([1.0], [1.0, -model.a1], innov, axis=1)[:, burn:]
    return out / math.sqrt(var)


def simulate(model: GaussianModel, n: int, seed) -> np.ndarray:
    """Draw one path ``X_1, ..., X_n`` of ``model``.

    Parameters
    ----------
    model : GaussianModel
    n : int
        Path length, at least 2.
    seed : int or SeedSpec
        The output is a pure function of ``(model, n, seed)``.

    Returns
    -------
    numpy.ndarray of shape (n,)
    """
    n = check_positive_int(n, "n", minimum=2)
    return _draw(model, n, [as_seed(seed).rng()])[0]


def simulate_many(model: GaussianModel, n: int, master_seed: int, indices, stream=()) -> np.ndarray:
    """Draw one path per replicate index; row ``r`` uses ``SeedSpec(master_seed, indices[r], stream)``."""
    n = check_positive_int(n, "n", minimum=2)
    rngs = [SeedSpec(master_seed, int(i), tuple(stream)).rng() for i in indices]
    if not rngs:
        return np.empty((0, n))
    return _draw(model, n, rngs)
