import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st
from scipy import special

from lrdlab.errors import NumericalError, ParameterError
from lrdlab.gauss_lrd import exact_partial_sum_variance, make_model
from lrdlab.hermite import (asymptotic_variance, compute_b_alpha, compute_kappa_alpha,
                            gamma_exponent, gauss_hermite_rule, hermite_coefficients,
                            hermite_eval, normal_expectation, scaling_d)
from lrdlab.subordinators import Subordinator, get_subordinator


def _rodrigues(q, x):
    s = sympy.Symbol("s")
    expr = (-1) ** q * sympy.exp(s**2 / 2) * sympy.diff(sympy.exp(-s**2 / 2), s, q)
    return float(sympy.N(expr.subs(s, sympy.Rational(str(x))), 30))


def test_hermite_small_values():
    assert hermite_eval(2, 2.0) == 3.0
    assert hermite_eval(3, 1.0) == -2.0
    assert hermite_eval(0, 5.0) == 1.0
    assert hermite_eval(1, -0.3) == -0.3


@pytest.mark.parametrize("x", [-2.5, -0.7, 0.0, 0.7, 1.3, 3.1])
def test_hermite_rodrigues_oracle(x):
    assert hermite_eval(10, x) == pytest.approx(_rodrigues(10, x), abs=1e-9)


def test_hermite_vectorized():
    x = np.linspace(-3, 3, 11)
    np.testing.assert_allclose(hermite_eval(4, x), x**4 - 6 * x**2 + 3, atol=1e-12)


def test_hermite_order_bound():
    hermite_eval(60, 0.5)
    with pytest.raises(ParameterError):
        hermite_eval(61, 0.5)
    with pytest.raises(ParameterError):
        hermite_eval(-1, 0.5)


def test_orthogonality():
    x, w = gauss_hermite_rule(128)
    for p in range(13):
        hp = hermite_eval(p, x)
        for q in range(13):
            # normalized by sqrt(p! q!): absolute 1e-8 on 12! is below float64 round-off
            val = np.dot(w, hp * hermite_eval(q, x)) / math.sqrt(math.factorial(p) * math.factorial(q))
            assert val == pytest.approx(1.0 if p == q else 0.0, abs=1e-8)


def test_rule_is_an_expectation():
    # E X^2 = 1, E X^4 = 3 under the standard normal
    assert normal_expectation(lambda x: np.ones_like(x)) == pytest.approx(1.0, abs=1e-14)
    assert normal_expectation(lambda x: x**4) == pytest.approx(3.0, abs=1e-12)


def test_coefficients_identity():
    e = hermite_coefficients("identity", q_max=6)
    assert e.j(1) == pytest.approx(1.0, abs=1e-12)
    assert max(abs(v) for v in e.coefficients[1:]) < 1e-12
    assert e.rank == 1


def test_coefficients_square():
    sq = Subordinator("square", lambda x: x * x, 1.0, 3.0)
    e = hermite_coefficients(sq, q_max=6)
    assert e.j(1) == pytest.approx(0.0, abs=1e-12)
    assert e.j(2) == pytest.approx(2.0, abs=1e-12)
    assert e.rank == 2
    assert hermite_coefficients("square-minus-one").rank == 2


def test_coefficients_exp():
    e = hermite_coefficients("exp", q_max=10)
    np.testing.assert_allclose(e.coefficients, math.sqrt(math.e), atol=1e-8)
    assert e.rank == 1


def test_coefficients_exp_mpmath_oracle():
    for q in (1, 4, 7):
        val = mpmath.quad(lambda t: mpmath.exp(t) * mpmath.mpf(hermite_eval(q, float(t)))
                          * mpmath.npdf(t), [-mpmath.inf, 0, mpmath.inf])
        assert hermite_coefficients("exp", q_max=7).j(q) == pytest.approx(float(val), abs=1e-8)


def test_rank_of_builtins():
    assert hermite_coefficients("quantile-exponential").rank == 1
    assert hermite_coefficients("lognormal:mu=0,sigma=0.5").rank == 1
    assert hermite_coefficients("constant:c=2").rank is None


def test_quantile_exponential_j1_oracle():
    # J_1 = E[X G(X)] = E[G'(X)] = E[phi(X)/(1 - Phi(X))]
    val = mpmath.quad(lambda t: mpmath.npdf(t) ** 2 / mpmath.ncdf(-t), [-mpmath.inf, 0, mpmath.inf])
    assert hermite_coefficients("quantile-exponential").j(1) == pytest.approx(float(val), abs=1e-8)


def test_node_doubling_contract():
    a = hermite_coefficients("quantile-exponential", q_max=8)
    b = hermite_coefficients("quantile-exponential", q_max=8, nodes=a.nodes)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-8)


def test_coefficients_non_convergence():
    step = Subordinator("step", lambda x: (x > 0.3).astype(float), 0.38, 0.38)
    with pytest.raises(NumericalError, match="last two estimates"):
        hermite_coefficients(step, q_max=3, max_nodes=512)


def test_coefficients_preconditions():
    with pytest.raises(ParameterError):
        hermite_coefficients("exp", q_max=0)
    with pytest.raises(ParameterError):
        hermite_coefficients("exp", nodes=32)


@pytest.mark.parametrize("name", ["identity", "exp", "quantile-exponential",
                                  "lognormal:mu=0.2,sigma=0.7", "square-minus-one"])
def test_parseval_gap_shrinks(name):
    sub = get_subordinator(name)
    coeffs = hermite_coefficients(sub, q_max=20).coefficients
    partial = np.cumsum([c * c / math.factorial(q) for q, c in enumerate(coeffs, start=1)])
    var = sub.variance
    assert np.all(partial <= var * (1 + 1e-9))
    gaps = var - partial
    assert np.all(np.diff(gaps) <= 1e-12)
    assert gaps[-1] < 0.05 * var


@pytest.mark.parametrize("alpha", [0.05, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.95])
def test_b_alpha_beta_oracle(alpha):
    assert compute_b_alpha(alpha) == pytest.approx(special.beta((1 - alpha) / 2, alpha),
                                                  rel=1e-9)


def test_beta_identity_itself():
    # verify Beta((1-a)/2, a) is the integral, independently with mpmath
    a = mpmath.mpf("0.5")
    e = (1 + a) / 2
    p = 2 / (1 - a)
    # x = u^p removes the singularity at zero
    head = mpmath.quad(lambda u: p * (1 + u**p) ** (-e), [0, 1])
    val = head + mpmath.quad(lambda x: x ** (-e) * (1 + x) ** (-e), [1, mpmath.inf])
    assert float(val) == pytest.approx(float(mpmath.beta((1 - a) / 2, a)), rel=1e-9)
    assert float(val) == pytest.approx(5.24412, abs=1e-5)


def test_b_alpha_values_and_divergence():
    assert compute_b_alpha(0.5) == pytest.approx(5.24412, abs=1e-5)
    assert compute_b_alpha(0.05) > compute_b_alpha(0.5) > 0
    with pytest.raises(ParameterError):
        compute_b_alpha(1.0)


def test_kappa():
    k = compute_kappa_alpha(0.5)
    assert k**2 == pytest.approx(13.9843, abs=1e-4)
    assert k == pytest.approx(3.73956, abs=1e-5)
    for a in (0.2, 0.5, 0.8):
        assert compute_kappa_alpha(a) ** 2 * (1 - a) * (2 - a) / 2 == \
            pytest.approx(compute_b_alpha(a), rel=1e-9)
    assert all(compute_kappa_alpha(a) > 0 for a in np.linspace(0.01, 0.99, 25))


def test_gamma_branches():
    assert gamma_exponent(0.25) == 1.5
    assert gamma_exponent(0.4) == pytest.approx(1.2)
    assert gamma_exponent(0.5) == 1.0
    assert gamma_exponent(0.75) == 1.0


def test_scaling_d():
    assert scaling_d(16, 1, 0.5) == pytest.approx(8.0)
    assert scaling_d(1, 3, 0.6) == 1.0
    assert scaling_d(1024, 2, 0.4) == pytest.approx(64.0)
    with pytest.raises(ParameterError):
        scaling_d(10, 4, 0.5)


def test_asymptotic_variance_forms():
    a, n = 0.4, 1000
    sigma2 = 4.2
    L = compute_b_alpha(a) / sigma2
    v = asymptotic_variance(n, 1, a, 1.0, L=L)
    assert v == pytest.approx(compute_kappa_alpha(a) ** 2 * n ** (2 - a) / sigma2, rel=1e-12)
    assert asymptotic_variance(1, 2, 0.3, 1.5, L=0.7) == \
        pytest.approx(1.5**2 / 2 * 2 / (0.4 * 1.4) * 0.7**2, rel=1e-12)
    with pytest.raises(ParameterError):
        asymptotic_variance(10, 2, 0.5, 1.0)


def test_asymptotic_variance_ratio_pinned():
    m = make_model(0.4, 2**20)
    v = asymptotic_variance(2**16, 1, 0.4, 1.0, sigma2=m.sigma2)
    ratio = exact_partial_sum_variance(m, 2**16) / v
    assert ratio == pytest.approx(0.8919, abs=5e-4)


@settings(max_examples=40, deadline=None)
@given(q=st.integers(1, 30), x=st.floats(-4, 4))
def test_recurrence_property(q, x):
    # H_{q+1} = x H_q - q H_{q-1} and H_q' = q H_{q-1}
    lhs = hermite_eval(q + 1, x)
    rhs = x * hermite_eval(q, x) - q * hermite_eval(q - 1, x)
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-9 * math.factorial(min(q, 20)))


def test_coefficients_cap_must_allow_doubling():
    with pytest.raises(ParameterError):
        hermite_coefficients("exp", nodes=128, max_nodes=128)
