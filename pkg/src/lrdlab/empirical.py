"""Empirical distribution and quantile functions of ``U_j = F(Y_j)``.

The uniform Bahadur-Kiefer process here is ``R_n = alpha_n + beta_n`` with
``alpha_n = (n/d)(F_n(t) - t)``, ``beta_n = (n/d)(F_n^{-1}(t) - t)`` and
``d = d_{n,m}`` the long-memory scaling.  The Vervaat-type integral
``(n/d) int_0^t R_n`` is evaluated exactly from order statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DataError, NumericalError, ParameterError
from .hermite import hermite_eval, scaling_d
from .subordinators import Subordinator, get_subordinator

__all__ = [
    "EmpiricalPair",
    "build_empirical",
    "bk_alpha",
    "bk_beta",
    "bk_process",
    "vervaat_empirical",
    "c_coefficient",
    "limit_scale_bk",
    "bk_limit_factor",
    "jump_grid",
]


@dataclass(frozen=True, eq=False)
class EmpiricalPair:
    u: np.ndarray = field(repr=False)   # sorted
    n: int
    scaling: float
    _cum: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        cum = np.concatenate([[0.0], np.cumsum(self.u)])
        object.__setattr__(self, "_cum", cum)

    def F_n(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.u, t, side="right")
        return k / self.n if k.ndim else float(k) / self.n

    def _ceil_index(self, t):
        # smallest k with k/n >= t, guarded against rounding in n*t
        n = self.n
        k = np.ceil(n * t).astype(np.int64)
        k = np.where((k - 1) / n >= t, k - 1, k)
        k = np.where(k / n < t, k + 1, k)
        return np.clip(k, 1, n)

    def F_n_inv(self, t):
        t = np.asarray(t, dtype=float)
        if np.any((t < 0) | (t > 1)):
            raise ParameterError("quantile level outside [0, 1]")
        out = self.u[self._ceil_index(t) - 1]
        return out if out.ndim else float(out)

    def integral_F_n(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.u, t, side="right")
        return (k * t - self._cum[k]) / self.n

    def integral_F_n_inv(self, t):
        t = np.asarray(t, dtype=float)
        n = self.n
        full = np.floor(n * t).astype(np.int64)
        full = np.where(full / n > t, full - 1, full)
        full = np.clip(full, 0, n)
        head = self._cum[full] / n
        rest = t - full / n
        nxt = self.u[np.minimum(full, n - 1)]
        return head + np.where(full < n, rest * nxt, 0.0)


def build_empirical(series, F, alpha: float, m: int = 1, L: float = 1.0) -> EmpiricalPair:
    """``U_j = F(Y_j)`` with ``d_{n,m}`` from :func:`scaling_d`.

    ``series`` is a :class:`SubordinatedSeries` or an array of ``Y`` values;
    ``F`` is a callable or a monotone :class:`Subordinator` (its ``cdf`` is used).
    """
    y = np.asarray(getattr(series, "y", series), dtype=float)
    if isinstance(F, (Subordinator, str)):
        sub = get_subordinator(F)
        if sub.cdf is None:
            raise ParameterError(f"{sub.name} has no continuous distribution function")
        F = sub.cdf
    u = np.asarray(F(y), dtype=float)
    if not np.all(np.isfinite(u)):
        raise DataError("distribution function is not finite at every sample")
    n = u.size
    if n < 1:
        raise ParameterError("empty sample")
    u = np.sort(u)
    u.setflags(write=False)
    return EmpiricalPair(u, n, scaling_d(n, m, alpha, L))


def bk_alpha(pair: EmpiricalPair, t):
    return pair.n / pair.scaling * (np.asarray(pair.F_n(t)) - np.asarray(t, dtype=float))


def bk_beta(pair: EmpiricalPair, t):
    return pair.n / pair.scaling * (np.asarray(pair.F_n_inv(t)) - np.asarray(t, dtype=float))


def bk_process(pair: EmpiricalPair, t):
    return bk_alpha(pair, t) + bk_beta(pair, t)


def vervaat_empirical(pair: EmpiricalPair, t):
    """``(n/d) int_0^t R_n(u) du``, exact."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ParameterError("t outside [0, 1]")
    scale = (pair.n / pair.scaling) ** 2
    val = scale * (pair.integral_F_n(t) + pair.integral_F_n_inv(t) - t * t)
    return float(val) if np.ndim(val) == 0 else val


def jump_grid(pair: EmpiricalPair) -> np.ndarray:
    """All points where ``F_n`` or ``F_n^{-1}`` change, plus the endpoints."""
    k = np.arange(pair.n + 1) / pair.n
    return np.unique(np.concatenate([[0.0, 1.0], pair.u, k]))


def c_coefficient(sub: Subordinator | str, q: int, x: float) -> float:
    """``c_q(x) = E (1{G(X) <= x} - F(x)) H_q(X)`` by quadrature over ``X <= G^{-1}(x)``."""
    sub = get_subordinator(sub)
    if q < 1:
        raise ParameterError("q must be at least 1")
    if sub.g_inverse is None:
        raise ParameterError(f"{sub.name} is not strictly increasing")
    with np.errstate(all="ignore"):
        a = float(sub.g_inverse(np.asarray(x, dtype=float)))
    if math.isnan(a):
        a = -math.inf
    if math.isinf(a):
        return 0.0
    val, err = integrate.quad(lambda z: hermite_eval(q, z) * math.exp(-0.5 * z * z),
                              -math.inf, a, epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-9:
        raise NumericalError(f"quadrature for c_{q}({x}) did not converge (error {err:.2e})")
    return val / math.sqrt(2.0 * math.pi)


def _limit_const(alpha, m):
    if not (0.0 < m * alpha < 1.0):
        raise ParameterError("requires 0 < m * alpha < 1")
    return 2.0 / ((2.0 - m * alpha) * (1.0 - m * alpha))


def limit_scale_bk(alpha: float, m: int, sub: Subordinator | str, t: float) -> float:
    """Standard deviation of the Gaussian (``m = 1``) limit of ``alpha_n(t)``."""
    sub = get_subordinator(sub)
    const = _limit_const(alpha, m)
    x = float(sub.ppf(t))
    return math.sqrt(const) * abs(c_coefficient(sub, m, x))


def bk_limit_factor(alpha: float, m: int, sub: Subordinator | str, t: float,
                    h: float = 1e-4) -> float:
    """Deterministic factor multiplying ``X_m^2`` in the limit of ``(n/d) R_n(t)``.

    ``c_m'`` is a Richardson-extrapolated central difference with step ``h``.
    """
    sub = get_subordinator(sub)
    const = _limit_const(alpha, m)
    x = float(sub.ppf(t))

    def central(step):
        return (c_coefficient(sub, m, x + step) - c_coefficient(sub, m, x - step)) / (2 * step)

    deriv = (4.0 * central(h / 2) - central(h)) / 3.0
    return const * c_coefficient(sub, m, x) * deriv / float(sub.pdf(x))
