import numpy as np
import pytest
from scipy import stats
from scipy.special import digamma

from mwhittaker.rand import (
    RngStream,
    WishartParams,
    inverse_wishart_logpdf,
    sample_inverse_wishart,
    sample_wishart,
    wishart_logpdf,
)
from mwhittaker.spd import DomainError, inv, logdet
from mwhittaker.whittaker import lyapunov_exponents


def test_stream_determinism():
    a = sample_wishart(WishartParams(2.5, 2), RngStream(7, 3), 5)
    b = sample_wishart(WishartParams(2.5, 2), RngStream(7, 3), 5)
    c = sample_wishart(WishartParams(2.5, 2), RngStream(7, 4), 5)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_params_validation():
    with pytest.raises(DomainError):
        WishartParams(0.4, 2)
    WishartParams(0.6, 2)


def test_wishart_d1_is_gamma(rng):
    x = sample_wishart(WishartParams(2.5, 1), rng, 100_000)[:, 0, 0]
    assert x.mean() == pytest.approx(2.5, rel=0.02)
    assert stats.kstest(x, stats.gamma(2.5).cdf).pvalue > 0.01


def test_wishart_mean_d2(rng):
    m = sample_wishart(WishartParams(3.0, 2), rng, 100_000).mean(axis=0)
    assert np.allclose(m, 3.0 * np.eye(2), atol=0.06)


def test_inverse_wishart_moments(rng):
    x = sample_inverse_wishart(WishartParams(2.0, 1), rng, 100_000)[:, 0, 0]
    assert x.mean() == pytest.approx(1.0, rel=0.05)  # heavy tail: infinite variance at alpha = 2
    y = sample_inverse_wishart(WishartParams(3.0, 2), rng, 100_000)
    assert np.trace(inv(y), axis1=1, axis2=2).mean() == pytest.approx(6.0, rel=0.02)


def test_orthogonal_invariance(rng):
    x = sample_wishart(WishartParams(2.2, 2), rng, 20_000)
    t = 0.7
    k = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    y = k.T @ sample_wishart(WishartParams(2.2, 2), rng, 20_000) @ k
    assert stats.ks_2samp(x[:, 0, 0], y[:, 0, 0]).pvalue > 0.01


def test_integer_dof_matches_outer_products(rng):
    # 2 alpha = 4 degrees of freedom: X = (1/2) sum of 4 outer products of standard normals
    x = sample_wishart(WishartParams(2.0, 2), rng, 20_000)
    g = rng.standard_normal((20_000, 4, 2))
    y = 0.5 * np.einsum("nki,nkj->nij", g, g)
    assert stats.ks_2samp(logdet(x), logdet(y)).pvalue > 0.01


def test_inverse_draws_invert_to_wishart(rng):
    a = np.trace(inv(sample_inverse_wishart(WishartParams(2.4, 2), rng, 20_000)), axis1=1, axis2=2)
    b = np.trace(sample_wishart(WishartParams(2.4, 2), rng, 20_000), axis1=1, axis2=2)
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_logpdf_d1():
    x = np.array([[[1.7]]])
    assert wishart_logpdf(x, 2.5) == pytest.approx(stats.gamma(2.5).logpdf(1.7) + np.log(1.7))
    assert inverse_wishart_logpdf(x, 2.5) == pytest.approx(stats.invgamma(2.5).logpdf(1.7) + np.log(1.7))


def test_lyapunov_exponents():
    a, b = lyapunov_exponents([1.0], 1)[0]
    assert a == pytest.approx(np.euler_gamma) and b == pytest.approx(np.euler_gamma)
    first, second = lyapunov_exponents([2.0], 2)[0]
    # digamma(3/2) = 2 - gamma - 2 log 2
    assert first == pytest.approx(-(2 - np.euler_gamma - 2 * np.log(2)), abs=1e-12)
    assert second == pytest.approx(-digamma(2.0))
