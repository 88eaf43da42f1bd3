import numpy as np
import pytest

from lrdlab.errors import ParameterError
from lrdlab.fbm import (CHOLESKY_MAX, coupled_kernel, fbm_covariance, fgn_autocovariance,
                        generate_coupled, generate_exact, increment_weights, mvn_constant)
from lrdlab.gauss_lrd import InnovationStream, generate_path, make_model
from lrdlab.hermite import compute_kappa_alpha


def test_covariance_examples():
    assert fbm_covariance(0.3, 1, 1) == pytest.approx(1.0)
    assert fbm_covariance(0.5, 2, 3) == pytest.approx(2.0)
    assert fbm_covariance(0.8, 1, 2) == pytest.approx(2**0.6)
    assert 2**0.6 == pytest.approx(1.515717, abs=1e-6)
    assert fbm_covariance(0.7, 1.3, 4.1) == fbm_covariance(0.7, 4.1, 1.3)
    with pytest.raises(ParameterError):
        fbm_covariance(0.7, -1, 1)


def test_fgn_autocovariance():
    g = fgn_autocovariance(0.75, 4)
    assert g[0] == 1.0
    assert g[1] == pytest.approx(0.5 * (2**1.5 - 2))
    assert g[1] == pytest.approx(0.414214, abs=1e-6)
    np.testing.assert_allclose(fgn_autocovariance(0.5, 5, 2.0), [2, 0, 0, 0, 0], atol=1e-15)


def test_exact_starts_at_zero():
    p = generate_exact(0.7, 100, step=0.5, seed=1)
    assert p.values[0] == 0.0 and p.times[0] == 0.0
    assert len(p.values) == 101 and p.step == 0.5
    assert p.method == "cholesky"
    assert generate_exact(0.7, CHOLESKY_MAX + 1, seed=1).method == "circulant"


def test_brownian_increments_uncorrelated():
    paths = generate_exact(0.5, 1000, seed=3, method="circulant", size=100)
    inc = np.diff(np.array([p.values for p in paths]), axis=1).ravel()
    r = np.corrcoef(inc[:-1], inc[1:])[0, 1]
    assert abs(r) < 4 / np.sqrt(inc.size)


def test_lag_one_covariance_h075():
    p = generate_exact(0.75, 100_000, seed=11)
    inc = np.diff(p.values)
    # LRD increments: use the exact variance of the sample lag product mean for a tolerance
    est = np.mean(inc[:-1] * inc[1:])
    assert est == pytest.approx(0.414214, abs=0.03)
    paths = generate_exact(0.75, 64, seed=12, size=3000)
    inc = np.diff(np.array([q.values for q in paths]), axis=1)
    prod = inc[:, 0] * inc[:, 1]
    se = prod.std(ddof=1) / np.sqrt(prod.size)
    assert abs(prod.mean() - 0.414214) < 3 * se


def test_cholesky_vs_circulant():
    n, h, reps = 512, 0.7, 2000
    a = np.diff([p.values for p in generate_exact(h, n, seed=1, method="cholesky", size=reps)], axis=1)
    b = np.diff([p.values for p in generate_exact(h, n, seed=2, method="circulant", size=reps)], axis=1)
    target = fgn_autocovariance(h, n)
    for lag in (0, 1, 5, 50):
        ca = np.mean(a[:, :n - lag] * a[:, lag:])
        cb = np.mean(b[:, :n - lag] * b[:, lag:])
        assert ca == pytest.approx(target[lag], abs=0.03)
        assert cb == pytest.approx(target[lag], abs=0.03)
        assert ca == pytest.approx(cb, abs=0.04)


def test_self_similarity_and_stationary_increments():
    h = 0.8
    paths = np.array([p.values for p in generate_exact(h, 256, seed=5, size=4000)])
    v64, v256 = paths[:, 64].var(), paths[:, 256].var()
    ratio = v256 / v64
    # standard error of a variance ratio of Gaussian samples, roughly 2/sqrt(R)
    assert ratio == pytest.approx(4 ** (2 * h), rel=3 * 2 * np.sqrt(2 / 4000))
    for t in (0, 100, 200):
        d = paths[:, t + 16] - paths[:, t]
        assert d.var() == pytest.approx(16 ** (2 * h), rel=3 * np.sqrt(2 / 4000))


def test_exact_errors():
    with pytest.raises(ParameterError):
        generate_exact(0.7, 10, step=0.0)
    with pytest.raises(ParameterError):
        generate_exact(0.7, 0)
    with pytest.raises(ParameterError):
        generate_exact(0.7, CHOLESKY_MAX + 1, method="cholesky")
    with pytest.raises(ParameterError):
        generate_exact(0.7, 10, method="spectral")


def test_exact_reference_w1_ks():
    from lrdlab.experiments import ks_distance
    from scipy import special

    w1 = [p.values[-1] for p in generate_exact(0.8, 64, step=1 / 64, seed=21, size=2000)]
    assert ks_distance(w1, special.ndtr) < 1.36 / np.sqrt(2000)


def test_kernel_and_weights():
    a = coupled_kernel(0.7, 5)
    p = 1.2
    assert a[0] == 0.0 and a[1] == pytest.approx(1 / p)
    assert a[3] == pytest.approx((3**p - 2**p) / p)
    np.testing.assert_allclose(increment_weights(0.7, 3), np.diff(coupled_kernel(0.7, 5)))


def test_mvn_constant():
    h = 0.8
    assert mvn_constant(h) == pytest.approx(1 / (0.3 * compute_kappa_alpha(0.4)))


def test_calibrated_variance_exact():
    model = make_model(0.4, 300)
    stream = InnovationStream(3)
    w = generate_coupled(model, stream, 257, normalization="calibrated")
    assert w.coupling_ref["variance_ratio"] == pytest.approx(1.0, rel=1e-8)
    phi = increment_weights(w.hurst, 300)
    c = w.values[1] / np.dot(phi, stream.values(-300, 1)[::-1])
    m = len(phi)
    cov = np.array([np.dot(phi[:m - k], phi[k:]) for k in range(m)])
    n = 257
    var = n * cov[0] + 2 * sum((n - k) * cov[k] for k in range(1, min(n, m)))
    assert c * c * var == pytest.approx(n ** (2 * w.hurst), rel=1e-8)


def test_coupled_direct_sum_and_determinism():
    model = make_model(0.4, 40)
    stream = InnovationStream(9)
    w = generate_coupled(model, stream, 30)
    phi = increment_weights(model.hurst, 40)
    xi = stream.values(-40, 30)
    inc = [sum(phi[i] * xi[j + 40 - i] for i in range(41)) for j in range(30)]
    np.testing.assert_allclose(w.values[1:], mvn_constant(model.hurst) * np.cumsum(inc), rtol=1e-10)
    assert w.values[0] == 0.0 and w.method == "coupled"
    again = generate_coupled(model, InnovationStream(9), 30)
    assert again.values.tobytes() == w.values.tobytes()
    assert w.coupling_ref["seed"] == 9 and w.coupling_ref["truncation"] == 40


def test_coupled_errors():
    from conftest import ConstantInnovations

    class Short(ConstantInnovations):
        def values(self, start, stop):
            return np.ones(stop - start - 1)

    model = make_model(0.4, 10)
    with pytest.raises(ParameterError):
        generate_coupled(model, Short(), 20)
    with pytest.raises(ParameterError):
        generate_coupled(model, InnovationStream(1), 20, normalization="other")
    with pytest.raises(ParameterError):
        generate_coupled(model, InnovationStream(1), 0)


def test_coupling_correlation():
    alpha, n, reps = 0.4, 2**14, 200
    model = make_model(alpha, 2**14)
    kappa = compute_kappa_alpha(alpha)
    a, b = [], []
    for r in range(reps):
        stream = InnovationStream(1000 + r)
        path = generate_path(model, n, stream)
        w = generate_coupled(model, stream, n)
        a.append(model.sigma / kappa * path.values[: n // 2].sum())
        b.append(w.values[n // 2])
    assert np.corrcoef(a, b)[0, 1] >= 0.9
