"""Hermite algebra under the standard normal weight and the scaling constants.

Polynomials are the probabilists' ones, ``H_0 = 1, H_1 = x``,
``H_{q+1} = x H_q - q H_{q-1}``, orthogonal with ``E H_p H_q = q! delta_pq``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import NumericalError, ParameterError
from .subordinators import Subordinator, get_subordinator

__all__ = [
    "HermiteExpansion",
    "hermite_eval",
    "gauss_hermite_rule",
    "normal_expectation",
    "hermite_coefficients",
    "compute_b_alpha",
    "compute_kappa_alpha",
    "gamma_exponent",
    "scaling_d",
    "asymptotic_variance",
    "untruncated_sigma2",
    "RANK_TOLERANCE",
]

MAX_ORDER = 60
RANK_TOLERANCE = 1e-10
# relative round-off of sum(w * G * H_q), in units of sqrt(E G^2 * q!)
ROUNDOFF = 1e-13


def hermite_eval(q: int, x):
    """Evaluate ``H_q`` at ``x`` (scalar or array) by the three-term recurrence."""
    if int(q) != q or q < 0:
        raise ParameterError(f"order must be a non-negative integer, got {q!r}")
    if q > MAX_ORDER:
        raise ParameterError(f"order {q} exceeds the supported bound {MAX_ORDER}")
    x = np.asarray(x, dtype=float)
    h_prev, h = np.ones_like(x), x.copy()
    if q == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    for k in range(1, int(q)):
        h_prev, h = h, x * h - k * h_prev
    return h if h.ndim else float(h)


def _hermite_table(q_max: int, x: np.ndarray) -> np.ndarray:
    """Rows ``H_0(x) .. H_{q_max}(x)``."""
    out = np.empty((q_max + 1, x.size))
    out[0] = 1.0
    if q_max >= 1:
        out[1] = x
    for k in range(1, q_max):
        out[k + 1] = x * out[k] - k * out[k - 1]
    return out


@lru_cache(maxsize=32)
def gauss_hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal density.

    ``roots_hermitenorm`` already targets ``exp(-x^2/2)``; dividing the
    weights by ``sqrt(2 pi)`` turns the rule into an expectation.  (The
    classical ``exp(-x^2)`` rule would need nodes scaled by ``sqrt(2)`` and
    weights by ``1/sqrt(pi)`` instead.)
    """
    x, w = special.roots_hermitenorm(int(nodes))
    w = w / math.sqrt(2.0 * math.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def normal_expectation(f, nodes: int = 128) -> float:
    """``E f(X)`` for ``X ~ N(0, 1)`` by Gauss-Hermite quadrature."""
    x, w = gauss_hermite_rule(nodes)
    return float(np.dot(w, f(x)))


@dataclass(frozen=True)
class HermiteExpansion:
    coefficients: tuple[float, ...]
    rank: int | None
    q_max: int
    nodes: int

    def j(self, q: int) -> float:
        """Coefficient ``J_q`` (``q >= 1``)."""
        return self.coefficients[q - 1]


def _coefficients_at(g, q_max: int, nodes: int) -> np.ndarray:
    x, w = gauss_hermite_rule(nodes)
    gx = np.asarray(g(x), dtype=float)
    if not np.all(np.isfinite(gx[w > 0])):
        raise NumericalError("subordinator is not finite at the quadrature nodes")
    table = _hermite_table(q_max, x)
    return table[1:] @ (w * gx)


def hermite_coefficients(sub: Subordinator | str, q_max: int = 10, nodes: int = 128,
                         tol: float = 1e-8, max_nodes: int = 2048) -> HermiteExpansion:
    """Coefficients ``J_1..J_Q`` of ``G`` and its Hermite rank.

    The node count doubles until every coefficient moves by less than
    ``tol * max(1, sqrt(E G^2))``; the finer estimate is returned.  For high
    orders the threshold is raised to the double-precision floor
    ``ROUNDOFF * sqrt(E G^2 * q!)``, which stays far below ``tol`` for ``q <= 10``.
    """
    sub = get_subordinator(sub)
    if q_max < 1:
        raise ParameterError("q_max must be at least 1")
    if nodes < 64:
        raise ParameterError("at least 64 quadrature nodes are required")
    if q_max > MAX_ORDER:
        raise ParameterError(f"q_max exceeds {MAX_ORDER}")
    scale = math.sqrt(max(sub.second_moment, 0.0))
    orders = np.arange(1, q_max + 1)
    floor = ROUNDOFF * scale * np.sqrt(special.gamma(orders + 1.0))
    thresh = np.maximum(tol * max(1.0, scale), floor)
    coarse = _coefficients_at(sub, q_max, nodes)
    if 2 * nodes > max_nodes:
        raise ParameterError("max_nodes must allow at least one doubling")
    while True:
        fine = _coefficients_at(sub, q_max, 2 * nodes)
        if np.all(np.abs(fine - coarse) < thresh):
            break
        nodes *= 2
        if 2 * nodes > max_nodes:
            raise NumericalError(
                f"Hermite coefficients did not stabilise by {nodes} nodes; "
                f"last two estimates {coarse.tolist()} and {fine.tolist()}")
        coarse = fine
    rank = None
    for q, jq in enumerate(fine, start=1):
        if abs(jq) > RANK_TOLERANCE * scale:
            rank = q
            break
    return HermiteExpansion(tuple(float(v) for v in fine), rank, q_max, 2 * nodes)


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha!r}")


@lru_cache(maxsize=256)
def compute_b_alpha(alpha: float) -> float:
    """``int_0^inf x^{-(1+a)/2} (1+x)^{-(1+a)/2} dx``.

    The range is split at 1.  On ``(0, 1]`` the substitution ``x = u^p``
    with ``p = 2/(1-a)`` removes the endpoint singularity; on ``(1, inf)``
    ``x = w^{-1/a}`` maps the tail onto a smooth integrand on ``(0, 1]``.
    """
    _check_alpha(alpha)
    e = (1.0 + alpha) / 2.0
    p = 2.0 / (1.0 - alpha)
    head, _ = integrate.quad(lambda u: p * (1.0 + u**p) ** (-e), 0.0, 1.0,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    tail, _ = integrate.quad(lambda w: (1.0 + w ** (1.0 / alpha)) ** (-e) / alpha, 0.0, 1.0,
                             epsabs=0.0, epsrel=1e-13, limit=200)
    return head + tail


def compute_kappa_alpha(alpha: float) -> float:
    """Positive root of ``kappa^2 = 2 b_alpha / ((1 - alpha)(2 - alpha))``."""
    b = compute_b_alpha(alpha)
    return math.sqrt(2.0 * b / ((1.0 - alpha) * (2.0 - alpha)))


def gamma_exponent(alpha: float, m: int = 1) -> float:
    """Reduction-principle exponent: ``2 - (m+1) alpha`` below ``1/(m+1)``, else 1."""
    _check_alpha(alpha)
    return 2.0 - (m + 1) * alpha if alpha < 1.0 / (m + 1) else 1.0


def untruncated_sigma2(alpha: float) -> float:
    """``1 + sum_{k>=1} k^{-(1+alpha)}``, the variance of the infinite-order process."""
    _check_alpha(alpha)
    return 1.0 + float(special.zeta(1.0 + alpha))


def scaling_d(n: int, m: int, alpha: float, L: float = 1.0) -> float:
    """``d_{n,m} = (n^{2 - m alpha} L^m)^{1/2}``; ``L = 1`` unless supplied."""
    if m * alpha >= 2.0:
        raise ParameterError("m * alpha must be below 2")
    if n < 1:
        raise ParameterError("n must be positive")
    return float(n) ** (1.0 - m * alpha / 2.0) * L ** (m / 2.0)


def asymptotic_variance(n: int, m: int, alpha: float, j_m: float,
                        L: float | None = None, sigma2: float | None = None) -> float:
    """Leading term of ``Var(sum_{j<=n} (Y_j - mu))`` for Hermite rank ``m``.

    ``L`` is the covariance's slowly varying factor; by default it is
    ``b_alpha / sigma2`` with ``sigma2`` the untruncated variance unless given.
    """
    if not (0.0 < m * alpha < 1.0):
        raise ParameterError("requires 0 < m * alpha < 1")
    if L is None:
        if sigma2 is None:
            sigma2 = untruncated_sigma2(alpha)
        L = compute_b_alpha(alpha) / sigma2
    return (j_m**2 / math.factorial(m)) * 2.0 / ((1.0 - m * alpha) * (2.0 - m * alpha)) \
        * float(n) ** (2.0 - m * alpha) * L**m
