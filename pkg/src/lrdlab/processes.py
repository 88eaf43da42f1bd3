"""Partial sums, the counting process and their integrated combination.

For a series ``Y_1..Y_n`` with mean ``mu``:

* ``S(t) = Y_1 + ... + Y_[t]`` (right-continuous, jumps at integers),
* ``N(t) = inf{s >= 1 : S(s) > t}``, attained at an integer,
* ``Q(t) = S(t) + mu N(mu t) - 2 mu t``,
* ``Z(t) = mu * int_0^t Q(s) ds``.

All integrals are closed-form sums over the step structure of ``S`` and
``N``.  Prefix sums are kept in centered form (``S(i) - mu i``) so that
values of ``Z`` stay accurate for long series.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, HorizonError, ParameterError
from .gauss_lrd import LrdGaussianPath
from .hermite import HermiteExpansion, hermite_coefficients
from .subordinators import Subordinator, get_subordinator

__all__ = [
    "SubordinatedSeries",
    "ProcessBundle",
    "IdentityTerms",
    "subordinate",
    "make_bundle",
    "partial_sum",
    "counting",
    "q_process",
    "z_process",
    "bahadur_kiefer_star",
    "vervaat",
    "vervaat_identity_decomposition",
]


@dataclass(frozen=True, eq=False)
class SubordinatedSeries:
    y: np.ndarray = field(repr=False)
    mu: float
    expansion: HermiteExpansion | None = None
    subordinator: str = ""
    source: dict | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise ParameterError("a series needs at least one value")
        if not np.all(np.isfinite(y)):
            raise DataError("series contains non-finite values")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def positive(self) -> bool:
        return bool(np.all(self.y >= 0))


def subordinate(path: LrdGaussianPath | np.ndarray, sub: Subordinator | str,
                expansion: HermiteExpansion | None = None) -> SubordinatedSeries:
    """``Y_j = G(eta~_j)`` for every value of the path, in order."""
    sub = get_subordinator(sub)
    values = path.values if isinstance(path, LrdGaussianPath) else np.asarray(path, float)
    source = None
    if isinstance(path, LrdGaussianPath):
        source = dict(path.innovations or {}, **path.model.to_dict())
    if expansion is None:
        expansion = hermite_coefficients(sub, q_max=4)
    y = sub(values)
    if sub.positive:
        # guard against -0.0 / round-off below zero for positive maps
        y = np.maximum(y, 0.0)
    return SubordinatedSeries(y, sub.mu, expansion, sub.name, source)


def _as_float(x):
    arr = np.asarray(x, dtype=float)
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


class ProcessBundle:
    """Evaluators for ``S, N, Q, Z, R*_n, V_n`` over one series.

    ``n_scale`` is the ``n`` in the rescaled processes; it defaults to the
    series length, but evaluating ``N(mu n)`` usually needs a longer series.
    """

    def __init__(self, series: SubordinatedSeries, alpha: float | None = None,
                 n_scale: int | None = None):
        self.series = series
        self.alpha = alpha
        self.mu = float(series.mu)
        self.n = series.n
        self.horizon = float(self.n)
        self.n_scale = int(n_scale) if n_scale is not None else self.n
        y = series.y
        mu = self.mu
        c = np.empty(self.n + 1)
        c[0] = 0.0
        np.cumsum(y, out=c[1:])
        idx = np.arange(self.n + 1, dtype=float)
        d = c - mu * idx
        self._c = c
        self._d = d
        # PD[k] = sum_{i<k} D_i
        self._pd = np.concatenate([[0.0], np.cumsum(d[:-1])])
        self._pe = None
        for arr in (self._c, self._d, self._pd):
            arr.setflags(write=False)

    # -- S ---------------------------------------------------------------
    def _check_time(self, t):
        if np.any(t < 0) or np.any(t > self.n):
            raise ParameterError(f"time outside [0, {self.n}]")

    def partial_sum(self, t):
        t = _as_float(t)
        self._check_time(t)
        return _out(self._c[np.floor(t).astype(np.int64)])

    def centered_sum(self, t):
        """``S(t) - mu t``."""
        t = _as_float(t)
        return _out(np.asarray(self.partial_sum(t)) - self.mu * t)

    def integral_centered_sum(self, x):
        """``int_0^x (S(s) - mu s) ds`` for ``0 <= x <= n``."""
        x = _as_float(x)
        self._check_time(x)
        k = np.floor(x).astype(np.int64)
        frac = x - k
        return _out(self._pd[k] - 0.5 * self.mu * k + frac * (self._d[k] - 0.5 * self.mu * frac))

    # -- N ---------------------------------------------------------------
    def _require_positive(self):
        if not self.mu > 0:
            raise ParameterError("the counting process needs mu > 0")
        if not self.series.positive:
            raise ParameterError("the counting process needs a non-negative series")

    def counting(self, x):
        """``N(x)``; raises :class:`HorizonError` once ``x >= S(n)``."""
        self._require_positive()
        x = _as_float(x)
        total = self._c[-1]
        if np.any(x >= total):
            raise HorizonError(float(np.max(x)), float(total))
        k = np.searchsorted(self._c[1:], x, side="right")
        return _out(k + 1) if np.ndim(k) else int(k) + 1

    def _pe_table(self):
        if self._pe is None:
            y = self.series.y
            d = self._d
            e = y * (0.5 - (d[1:] + d[:-1]) / (2.0 * self.mu))
            self._pe = np.concatenate([[0.0], np.cumsum(e)])
        return self._pe

    def integral_centered_counting(self, u):
        """``int_0^u (N(v) - v/mu) dv`` for ``0 <= u < S(n)``."""
        u = _as_float(u)
        if np.any(u < 0):
            raise ParameterError("level must be non-negative")
        n_u = np.asarray(self.counting(u))
        k = n_u - 1
        pe = self._pe_table()
        rem = u - self._c[k]
        t = u / self.mu
        bracket = 0.5 * (k + 2 - t) - self._d[k] / (2.0 * self.mu)
        return _out(pe[k] + rem * bracket)

    # -- combinations ----------------------------------------------------
    def q_process(self, t):
        t = _as_float(t)
        mu = self.mu
        return _out(np.asarray(self.partial_sum(t)) + mu * np.asarray(self.counting(mu * t))
                    - 2.0 * mu * t)

    def z_process(self, t):
        t = _as_float(t)
        self._check_time(t)
        return _out(self.mu * (np.asarray(self.integral_centered_sum(t))
                               + np.asarray(self.integral_centered_counting(self.mu * t))))

    def a_term(self, t):
        """``mu * int_{N(mu t)}^{t} (S(s) - mu s - (S(t) - mu t)) ds`` (signed)."""
        t = _as_float(t)
        nt = np.asarray(self.counting(self.mu * t), dtype=float)
        d_t = np.asarray(self.centered_sum(t))
        ints = np.asarray(self.integral_centered_sum(t)) - np.asarray(self.integral_centered_sum(nt))
        return _out(self.mu * (ints - d_t * (t - nt)))

    def _need_alpha(self):
        if self.alpha is None:
            raise ParameterError("alpha is required for the rescaled processes")
        return self.alpha

    def bahadur_kiefer_star(self, s):
        alpha = self._need_alpha()
        n = self.n_scale
        s = _as_float(s)
        return _out(n ** (alpha / 2.0) * np.asarray(self.q_process(n * s)) / n)

    def vervaat(self, t):
        alpha = self._need_alpha()
        n = self.n_scale
        t = _as_float(t)
        return _out(np.asarray(self.z_process(n * t)) / (self.mu * n ** (2.0 - alpha)))

    def breakpoints(self, T: float | None = None) -> np.ndarray:
        """Integers in ``[0, T]`` together with the jump times ``S(j)/mu`` of ``N(mu .)``."""
        T = self.horizon if T is None else float(T)
        ints = np.arange(0, math.floor(T) + 1, dtype=float)
        jumps = self._c[1:] / self.mu if self.mu > 0 else np.empty(0)
        jumps = jumps[jumps <= T]
        return np.unique(np.concatenate([ints, jumps]))


@dataclass(frozen=True)
class IdentityTerms:
    lhs: float
    sq_term: float
    a_term: float
    q_term: float
    residual: float


def make_bundle(series: SubordinatedSeries, alpha: float | None = None,
                n_scale: int | None = None) -> ProcessBundle:
    return ProcessBundle(series, alpha, n_scale)


def _bundle(obj) -> ProcessBundle:
    return obj if isinstance(obj, ProcessBundle) else ProcessBundle(obj)


def partial_sum(series, t):
    return _bundle(series).partial_sum(t)


def counting(series, t):
    return _bundle(series).counting(t)


def q_process(bundle, t):
    return _bundle(bundle).q_process(t)


def z_process(bundle, t):
    return _bundle(bundle).z_process(t)


def bahadur_kiefer_star(bundle: ProcessBundle, s):
    return bundle.bahadur_kiefer_star(s)


def vervaat(bundle: ProcessBundle, t):
    return bundle.vervaat(t)


def vervaat_identity_decomposition(bundle, t: float) -> IdentityTerms:
    """Evaluate both sides of ``Z = (S - mu t)^2/2 + A - Q^2/2`` at ``t``."""
    b = _bundle(bundle)
    lhs = float(b.z_process(t))
    d = float(b.centered_sum(t))
    sq = 0.5 * d * d
    a = float(b.a_term(t))
    q = float(b.q_process(t))
    qt = 0.5 * q * q
    return IdentityTerms(lhs, sq, a, qt, lhs - (sq + a - qt))
