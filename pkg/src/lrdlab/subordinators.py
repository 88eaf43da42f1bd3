"""Built-in subordinating maps ``G`` applied to a standard Gaussian sequence.

Each subordinator carries what the rest of the package needs about the
marginal law of ``Y = G(X)``, ``X ~ N(0, 1)``: the mean, the second moment,
and, for strictly increasing maps, the distribution function ``F`` of ``Y``,
its quantile function and ``G^{-1}``.

Names follow ``kind[:key=value,...]``, e.g. ``"exp"`` or
``"quantile-exponential:lambda=2"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special, stats

from .errors import ParameterError

__all__ = ["Subordinator", "get_subordinator", "parse_name", "BUILTINS"]


@dataclass(frozen=True)
class Subordinator:
    name: str
    g: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    mu: float
    second_moment: float
    description: str = ""
    positive: bool = False
    j1: float | None = None
    cdf: Callable | None = field(default=None, repr=False, compare=False)
    ppf: Callable | None = field(default=None, repr=False, compare=False)
    g_inverse: Callable | None = field(default=None, repr=False, compare=False)
    pdf: Callable | None = field(default=None, repr=False, compare=False)

    def __call__(self, x):
        return self.g(np.asarray(x, dtype=float))

    @property
    def variance(self) -> float:
        return self.second_moment - self.mu**2

    @property
    def monotone(self) -> bool:
        return self.g_inverse is not None


def parse_name(name: str) -> tuple[str, dict[str, float]]:
    kind, _, rest = name.strip().partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ParameterError(f"malformed subordinator parameter {item!r} in {name!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ParameterError(f"non-numeric parameter {item!r} in {name!r}") from None
    return kind.strip(), params


def _identity(p):
    return Subordinator(
        "identity", lambda x: x, 0.0, 1.0, "G(x) = x", positive=False, j1=1.0,
        cdf=special.ndtr, ppf=special.ndtri, g_inverse=lambda y: np.asarray(y, float),
        pdf=stats.norm.pdf,
    )


def _square_minus_one(p):
    return Subordinator("square-minus-one", lambda x: x * x - 1.0, 0.0, 2.0,
                        "G(x) = x^2 - 1", j1=0.0)


def _exp(p):
    e = math.e
    return Subordinator(
        "exp", np.exp, math.sqrt(e), e * e, "G(x) = exp(x)", positive=True, j1=math.sqrt(e),
        cdf=lambda y: special.ndtr(np.log(y)), ppf=lambda u: np.exp(special.ndtri(u)),
        g_inverse=np.log, pdf=lambda y: stats.lognorm.pdf(y, 1.0),
    )


def _lognormal(p):
    s = p.pop("sigma", 1.0)
    m = p.pop("mu", 0.0)
    if s <= 0:
        raise ParameterError("lognormal sigma must be positive")
    mean = math.exp(m + s * s / 2)
    return Subordinator(
        f"lognormal:mu={m:g},sigma={s:g}", lambda x: np.exp(m + s * x), mean,
        math.exp(2 * m + 2 * s * s), "G(x) = exp(mu + sigma x)", positive=True,
        j1=s * mean,
        cdf=lambda y: special.ndtr((np.log(y) - m) / s),
        ppf=lambda u: np.exp(m + s * special.ndtri(u)),
        g_inverse=lambda y: (np.log(y) - m) / s,
        pdf=lambda y: stats.lognorm.pdf(y, s, scale=math.exp(m)),
    )


def _quantile_exponential(p):
    lam = p.pop("lambda", 1.0)
    if lam <= 0:
        raise ParameterError("exponential rate lambda must be positive")

    def g(x):
        # -log(1 - Phi(x)) evaluated as -log Phi(-x) to stay exact in the upper tail
        return -special.log_ndtr(-np.asarray(x, float)) / lam

    def g_inverse(y):
        # Phi^{-1}(1 - exp(-lam y)) == -Phi^{-1}(exp(-lam y))
        return -special.ndtri(np.exp(-lam * np.asarray(y, float)))

    return Subordinator(
        f"quantile-exponential:lambda={lam:g}", g, 1.0 / lam, 2.0 / lam**2,
        "G(x) = F^{-1}(Phi(x)), F exponential", positive=True, j1=None,
        cdf=lambda y: -np.expm1(-lam * np.asarray(y, float)),
        ppf=lambda u: -np.log1p(-np.asarray(u, float)) / lam,
        g_inverse=g_inverse, pdf=lambda y: lam * np.exp(-lam * np.asarray(y, float)),
    )


def _constant(p):
    c = p.pop("c", 1.0)
    return Subordinator(f"constant:c={c:g}", lambda x: np.full(np.shape(x), c), c, c * c,
                        "G(x) = c", positive=c >= 0, j1=0.0)


BUILTINS = {
    "identity": _identity,
    "square-minus-one": _square_minus_one,
    "exp": _exp,
    "lognormal": _lognormal,
    "quantile-exponential": _quantile_exponential,
    "constant": _constant,
}


def get_subordinator(name: str | Subordinator) -> Subordinator:
    """Look up a built-in subordinator by its string name."""
    if isinstance(name, Subordinator):
        return name
    kind, params = parse_name(name)
    try:
        factory = BUILTINS[kind]
    except KeyError:
        raise ParameterError(
            f"unknown subordinator {kind!r}; choose from {sorted(BUILTINS)}") from None
    sub = factory(params)
    if params:
        raise ParameterError(f"unknown parameters {sorted(params)} for {kind!r}")
    return sub
