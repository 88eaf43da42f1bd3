"""Gaussian linear (moving-average) process with power-law weights.

The driving noise is a double sequence of i.i.d. standard normals
``xi_k``.  The weights are ``psi_0 = 1`` and ``psi_k = k**(-(1 + alpha)/2)``
for ``1 <= k <= M``; the process is ``eta_j = sum_k psi_k xi_{j-k}`` and the
standardized path is ``eta_j / sigma`` with ``sigma**2 = sum psi_k**2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ParameterError

__all__ = [
    "LinearProcessModel",
    "InnovationStream",
    "LrdGaussianPath",
    "make_model",
    "generate_path",
    "model_covariance",
    "model_autocorrelation",
    "exact_partial_sum_variance",
    "DEFAULT_TRUNCATION",
]

DEFAULT_TRUNCATION = 2**16

# direct summation is used below this many multiply-adds
_DIRECT_LIMIT = 2_000_000


@dataclass(frozen=True, eq=False)
class LinearProcessModel:
    alpha: float
    truncation: int
    weights: np.ndarray = field(repr=False)
    sigma: float

    @property
    def sigma2(self) -> float:
        return self.sigma**2

    @property
    def hurst(self) -> float:
        return 1.0 - self.alpha / 2.0

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "truncation": self.truncation,
            "lead_weight": float(self.weights[0]),
            "sigma2": self.sigma2,
        }


def make_model(alpha: float, truncation: int = DEFAULT_TRUNCATION,
               lead_weight: float = 1.0) -> LinearProcessModel:
    """Build the truncated weight sequence ``psi_0..psi_M``.

    ``lead_weight`` sets ``psi_0``; the default 1 keeps every weight on the
    exact power rule for ``k >= 1``.
    """
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")
    if int(truncation) != truncation or truncation < 0:
        raise ParameterError(f"truncation must be a non-negative integer, got {truncation!r}")
    if not lead_weight > 0:
        raise ParameterError("lead_weight must be positive")
    truncation = int(truncation)
    k = np.arange(1, truncation + 1, dtype=float)
    weights = np.empty(truncation + 1)
    weights[0] = lead_weight
    weights[1:] = k ** (-(1.0 + alpha) / 2.0)
    sigma = float(np.sqrt(np.sum(weights**2)))
    weights.setflags(write=False)
    return LinearProcessModel(float(alpha), truncation, weights, sigma)


def _zigzag(b: int) -> int:
    return 2 * b if b >= 0 else -2 * b - 1


class InnovationStream:
    """Counter-based i.i.d. N(0, 1) sequence indexed by any integer ``k``.

    Indices are grouped into blocks of ``block_size``; block ``b`` is drawn
    from a Philox generator keyed by ``(seed, stream_id)`` with its counter
    offset by ``b``.  Any index range can therefore be materialized without
    generating a prefix, and two streams with the same key agree everywhere.
    """

    def __init__(self, seed: int, stream_id: int = 0, block_size: int = 4096):
        if not (0 <= seed < 2**64 and 0 <= stream_id < 2**64):
            raise ParameterError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self.block_size = int(block_size)
        self._key = self.seed | (self.stream_id << 64)
        self._cache: dict[int, np.ndarray] = {}

    def __repr__(self):
        return f"InnovationStream(seed={self.seed}, stream_id={self.stream_id})"

    def ref(self) -> dict:
        return {"seed": self.seed, "stream_id": self.stream_id}

    def _block(self, b: int) -> np.ndarray:
        blk = self._cache.get(b)
        if blk is None:
            # high counter word addresses the block; the low words are
            # consumed by the draw and never reach it
            bitgen = np.random.Philox(key=self._key, counter=[0, 0, 0, _zigzag(b)])
            blk = np.random.Generator(bitgen).standard_normal(self.block_size)
            if len(self._cache) > 256:
                self._cache.clear()
            self._cache[b] = blk
        return blk

    def values(self, start: int, stop: int) -> np.ndarray:
        """Return ``xi_k`` for ``start <= k < stop``."""
        if stop < start:
            raise ParameterError("stop must not precede start")
        out = np.empty(stop - start)
        bs = self.block_size
        k = start
        while k < stop:
            b = k // bs
            lo = k - b * bs
            hi = min(bs, stop - b * bs)
            out[k - start:k - start + hi - lo] = self._block(b)[lo:hi]
            k += hi - lo
        return out

    def __getitem__(self, k: int) -> float:
        return float(self.values(k, k + 1)[0])


@dataclass(frozen=True, eq=False)
class LrdGaussianPath:
    model: LinearProcessModel
    values: np.ndarray = field(repr=False)
    n: int
    innovations: dict | None = None


def generate_path(model: LinearProcessModel, n: int, innovations: InnovationStream,
                  method: str = "auto") -> LrdGaussianPath:
    """Standardized path ``eta_j / sigma`` for ``j = 0..n-1``.

    ``method`` is ``"direct"``, ``"fft"`` (zero-padded linear convolution)
    or ``"auto"``, which switches to the transform once ``n * M`` is large.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    n = int(n)
    M = model.truncation
    xi = innovations.values(-M, n)
    if method == "auto":
        method = "direct" if n * (M + 1) <= _DIRECT_LIMIT else "fft"
    if method == "direct":
        full = np.convolve(xi, model.weights)
    elif method == "fft":
        full = fftconvolve(xi, model.weights)
    else:
        raise ParameterError(f"unknown method {method!r}")
    eta = full[M:M + n] / model.sigma
    eta.setflags(write=False)
    return LrdGaussianPath(model, eta, n, innovations.ref())


def model_covariance(model: LinearProcessModel, lag: int) -> float:
    """Exact lag covariance of the standardized truncated process."""
    lag = abs(int(lag))
    w = model.weights
    if lag > model.truncation:
        return 0.0
    return float(np.dot(w[:len(w) - lag], w[lag:]) / model.sigma2)


def model_autocorrelation(model: LinearProcessModel, max_lag: int) -> np.ndarray:
    """Vector of ``model_covariance`` for lags ``0..max_lag`` (FFT evaluated)."""
    w = model.weights
    M = model.truncation
    if M == 0:
        out = np.zeros(max_lag + 1)
        out[0] = 1.0
        return out
    ac = fftconvolve(w, w[::-1])[M:] / model.sigma2
    out = np.zeros(max_lag + 1)
    m = min(max_lag, M)
    out[:m + 1] = ac[:m + 1]
    out[0] = 1.0
    return out


def exact_partial_sum_variance(model: LinearProcessModel, n: int) -> float:
    """``Var(eta~_1 + ... + eta~_n)`` from the exact model covariances."""
    if int(n) != n or n < 1:
        raise ParameterError("n must be a positive integer")
    n = int(n)
    if n == 1:
        return 1.0
    rho = model_autocorrelation(model, n - 1)
    k = np.arange(1, n)
    return float(n + 2.0 * np.dot(n - k, rho[1:n]))
