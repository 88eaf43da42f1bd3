"""Fractional Brownian motion: exact reference paths and a coupled construction.

Exact paths come from the fractional Gaussian noise covariance, either by a
Cholesky factor (small grids) or by circulant embedding.  The coupled path
is a discretized Mandelbrot-Van Ness integral driven by the *same*
innovations ``xi_k`` that generate a linear-process path, so the two can be
compared realization by realization.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky
from scipy.signal import fftconvolve

from .errors import NumericalError, ParameterError
from .gauss_lrd import InnovationStream, LinearProcessModel
from .hermite import compute_kappa_alpha

__all__ = [
    "FbmPath",
    "fbm_covariance",
    "fgn_autocovariance",
    "generate_exact",
    "generate_coupled",
    "coupled_kernel",
    "increment_weights",
    "mvn_constant",
    "CHOLESKY_MAX",
]

CHOLESKY_MAX = 4096
EIGEN_CLIP = 1e-9


@dataclass(frozen=True, eq=False)
class FbmPath:
    hurst: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    method: str
    coupling_ref: dict | None = None

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def fbm_covariance(hurst: float, s: float, t: float) -> float:
    if s < 0 or t < 0:
        raise ParameterError("times must be non-negative")
    h2 = 2.0 * hurst
    return 0.5 * (s**h2 + t**h2 - abs(s - t) ** h2)


def fgn_autocovariance(hurst: float, n: int, step: float = 1.0) -> np.ndarray:
    """Autocovariance ``gamma(0..n-1)`` of increments over a grid of width ``step``."""
    k = np.arange(n, dtype=float)
    h2 = 2.0 * hurst
    g = 0.5 * (np.abs(k + 1) ** h2 - 2.0 * k**h2 + np.abs(k - 1) ** h2)
    return g * step**h2


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _cholesky_increments(gamma, size, rng):
    n = len(gamma)
    idx = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    lower = cholesky(gamma[idx], lower=True)
    z = rng.standard_normal((size, n))
    return z @ lower.T


def _circulant_increments(gamma, size, rng):
    n = len(gamma)
    if n == 1:
        return rng.standard_normal((size, 1)) * np.sqrt(gamma[0])
    # first row of the 2(n-1) circulant: gamma_0..gamma_{n-1}, gamma_{n-2}..gamma_1
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    m = len(row)
    lam = np.fft.fft(row).real
    if lam.min() < -EIGEN_CLIP:
        return None
    lam = np.where(lam < 0, 0.0, lam)
    z = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
    w = np.fft.fft(np.sqrt(lam / m) * z, axis=1)
    return w.real[:, :n]


def generate_exact(hurst: float, n_steps: int, step: float = 1.0, seed=None,
                   method: str = "auto", size: int | None = None):
    """Exact fBm on ``0, step, ..., n_steps * step``.

    ``method`` is ``"cholesky"``, ``"circulant"`` or ``"auto"`` (Cholesky up to
    ``CHOLESKY_MAX`` steps).  Circulant embedding falls back to Cholesky if an
    embedding eigenvalue is below ``-1e-9``.  With ``size`` given, a list of
    independent paths is returned.
    """
    if not (0.0 < hurst < 1.0):
        raise ParameterError("hurst must lie in (0, 1)")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ParameterError("n_steps must be a positive integer")
    if not step > 0:
        raise ParameterError("step must be positive")
    n_steps = int(n_steps)
    rng = _rng(seed)
    count = 1 if size is None else int(size)
    gamma = fgn_autocovariance(hurst, n_steps, step)
    if method == "auto":
        method = "cholesky" if n_steps <= CHOLESKY_MAX else "circulant"
    if method == "circulant":
        inc = _circulant_increments(gamma, count, rng)
        if inc is None:
            if n_steps > CHOLESKY_MAX:
                raise NumericalError("circulant embedding is not non-negative and the grid "
                                     "is too large for the Cholesky fallback")
            method = "cholesky"
    if method == "cholesky":
        if n_steps > CHOLESKY_MAX:
            raise ParameterError(f"Cholesky generation is limited to {CHOLESKY_MAX} steps")
        inc = _cholesky_increments(gamma, count, rng)
    elif method != "circulant":
        raise ParameterError(f"unknown method {method!r}")
    times = np.arange(n_steps + 1) * step
    paths = []
    for row in inc:
        values = np.concatenate([[0.0], np.cumsum(row)])
        paths.append(FbmPath(hurst, times, values, method))
    return paths[0] if size is None else paths


def coupled_kernel(hurst: float, length: int) -> np.ndarray:
    """Cell-averaged power kernel ``a(x) = int_{x-1}^{x} u^{H-1/2} du`` for ``x = 0..length-1``.

    ``a(0) = 0``.  Averaging the Mandelbrot-Van Ness kernel over unit cells
    gives the increment weights ``phi_i = a(i+1) - a(i)`` used by
    :func:`generate_coupled`.
    """
    p = hurst + 0.5
    x = np.arange(length, dtype=float)
    a = np.zeros(length)
    a[1:] = (x[1:] ** p - (x[1:] - 1.0) ** p) / p
    return a


def increment_weights(hurst: float, truncation: int) -> np.ndarray:
    a = coupled_kernel(hurst, truncation + 2)
    return np.diff(a)


def mvn_constant(hurst: float) -> float:
    """Normalizer making the Mandelbrot-Van Ness integral a standard fBm.

    Equals ``1 / ((H - 1/2) kappa_alpha)`` with ``alpha = 2 - 2H``.
    """
    return 1.0 / ((hurst - 0.5) * compute_kappa_alpha(2.0 - 2.0 * hurst))


def _sum_variance(weights: np.ndarray, n: int) -> float:
    """Variance of ``sum_{j<n} w_j`` for the moving average with ``weights``."""
    m = len(weights) - 1
    ac = fftconvolve(weights, weights[::-1])[m:]
    lags = min(n - 1, m)
    k = np.arange(1, lags + 1)
    return float(n * ac[0] + 2.0 * np.dot(n - k, ac[1:lags + 1]))


def generate_coupled(model: LinearProcessModel, innovations: InnovationStream, n: int,
                     normalization: str = "mvn") -> FbmPath:
    """fBm with ``H = 1 - alpha/2`` on the integer grid ``0..n`` built from ``xi_{-M..n-1}``.

    ``W(t) = c * sum_{j<t} sum_{i=0}^{M} phi_i xi_{j-i}`` with the increment
    weights ``phi`` of :func:`increment_weights`, truncated at the same lag
    ``M`` as the linear process.  ``normalization="mvn"`` uses the exact
    Mandelbrot-Van Ness constant; ``"calibrated"`` instead rescales so that
    the exact variance of ``W(n)`` equals ``n^{2H}``.  The ratio
    ``Var W(n) / n^{2H}`` is stored in ``coupling_ref`` either way.
    """
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    n = int(n)
    M = model.truncation
    hurst = model.hurst
    xi = innovations.values(-M, n)
    if len(xi) != n + M:
        raise ParameterError("innovation range does not match the model truncation")
    phi = increment_weights(hurst, M)
    var_n = _sum_variance(phi, n)
    if normalization == "mvn":
        c = mvn_constant(hurst)
    elif normalization == "calibrated":
        c = n**hurst / np.sqrt(var_n)
    else:
        raise ParameterError(f"unknown normalization {normalization!r}")
    w = fftconvolve(xi, phi)[M:M + n] if n * (M + 1) > 2_000_000 else np.convolve(xi, phi)[M:M + n]
    values = np.empty(n + 1)
    values[0] = 0.0
    np.cumsum(w, out=values[1:])
    values *= c
    values.setflags(write=False)
    ref = dict(innovations.ref(), **model.to_dict(), normalization=normalization,
               variance_ratio=float(c * c * var_n / n ** (2 * hurst)))
    return FbmPath(hurst, np.arange(n + 1, dtype=float), values, "coupled", ref)
