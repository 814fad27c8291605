import numpy as np
import pytest
from scipy.special import gammaln

from mwhittaker.mc import estimate_from_log_weights, find_mode, student_t_is
from mwhittaker.quad import de_integral, de_log_integral, logsumexp_c, nested_de_log_integral


def test_gamma_function_by_de():
    for a in (0.7, 2.7, 10.3):
        v = de_log_integral(lambda u: a * u - np.exp(u), 0.0, 1.0, rtol=1e-13)
        assert float(v) == pytest.approx(gammaln(a), rel=1e-10, abs=1e-12)


def test_batched_centres():
    a = np.array([1.5, 3.0, 8.0])
    v = de_log_integral(lambda u: a[:, None] * u - np.exp(u), np.log(a), 1.0)
    assert np.allclose(v, gammaln(a), atol=1e-10)


def test_nested_gaussian():
    v = nested_de_log_integral(lambda x, y: -0.5 * (x**2 + y**2 - x * y), [0.0, lambda x: 0.5 * x], [1.0, 1.0])
    # det of [[1, -1/2], [-1/2, 1]] is 3/4
    assert float(v) == pytest.approx(np.log(2 * np.pi / np.sqrt(0.75)), abs=1e-10)


def test_finite_interval():
    assert de_integral(lambda x: np.sqrt(x), 0.0, 1.0) == pytest.approx(2 / 3, rel=1e-10)


def test_logsumexp_handles_minus_inf():
    assert logsumexp_c(np.array([-np.inf, 0.0, 0.0])) == pytest.approx(np.log(2))
    assert logsumexp_c(np.array([-np.inf, -np.inf])) == -np.inf


def test_log_weights_estimate():
    est = estimate_from_log_weights(np.log([1.0, 2.0, 3.0]))
    assert est.value == pytest.approx(2.0)
    assert est.n == 3
    assert est.within(2.0)


def test_student_t_is_recovers_gaussian_mass(rng):
    def log_f(u):
        u = np.atleast_2d(u)
        return -0.5 * ((u - 1.0) ** 2).sum(-1)

    mode, hess = find_mode(lambda u: float(log_f(u[None])[0]), np.zeros(2))
    assert np.allclose(mode, 1.0, atol=1e-6)
    est = student_t_is(log_f, mode, np.linalg.inv(hess), 20_000, rng)
    assert est.within(2 * np.pi, n_se=4)
