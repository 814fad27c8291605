import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwhittaker import spd
from mwhittaker.rand import RngStream


def test_sqrtm_examples():
    assert np.allclose(spd.sqrtm(np.eye(2)), np.eye(2))
    assert np.allclose(spd.sqrtm(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    r = spd.sqrtm(a)
    assert np.allclose(r @ r, a, atol=1e-14)
    assert np.allclose(np.sort(np.linalg.eigvalsh(r)), [1.0, np.sqrt(3.0)])


def test_log_exp():
    assert np.allclose(spd.logm_sym(np.eye(3)), 0.0)
    assert np.allclose(spd.expm_sym(np.zeros((2, 2))), np.eye(2))
    assert np.allclose(spd.logm_sym(np.diag([np.e, np.e**2])), np.diag([1.0, 2.0]))


def test_inverse():
    assert np.allclose(spd.inv(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    a = np.array([[2.0, 1.0], [1.0, 2.0]])
    assert np.allclose(spd.inv(a), np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3)


def test_congruence():
    x = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.allclose(spd.sym_mult(np.eye(2), x), x)
    assert np.allclose(spd.sym_mult(x, np.eye(2)), x)
    assert np.allclose(spd.sym_mult(np.array([[3.0]]), np.array([[2.0]])), 6.0)
    assert np.allclose(spd.sym_mult(np.array([[4.0]]), np.array([[0.5]])), 2.0)


def test_logdet_and_mvgamma():
    assert spd.logdet(np.diag([2.0, 2.0])) == pytest.approx(2 * np.log(2))
    assert spd.log_mvgamma(1.0, 1) == pytest.approx(0.0, abs=1e-15)
    assert spd.log_mvgamma(2.0, 2) == pytest.approx(np.log(np.pi / 2))
    assert spd.log_mvgamma(2.0, 3) == pytest.approx(np.log(np.pi**2 / 2))


def test_mvgamma_domain():
    with pytest.raises(spd.DomainError):
        spd.log_mvgamma(0.4, 2)


def test_not_spd_rejected():
    with pytest.raises(spd.NotPositiveDefiniteError):
        spd.as_spd(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_upper_triangle_roundtrip():
    a = np.array([[2.0, 0.5, 0.1], [0.5, 3.0, -0.2], [0.1, -0.2, 1.0]])
    v = spd.upper_triangle(a)
    assert v.tolist() == [2.0, 0.5, 0.1, 3.0, -0.2, 1.0]
    assert np.array_equal(spd.from_upper_triangle(v, 3), a)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_sqrt_and_log_are_inverse_operations(d, seed):
    a = spd.random_spd(d, RngStream(seed, 0))
    r = spd.sqrtm(a)
    assert np.allclose(r @ r, a, rtol=1e-10, atol=1e-12)
    assert np.allclose(spd.expm_sym(spd.logm_sym(a)), a, rtol=1e-10, atol=1e-12)
    assert np.allclose(spd.invsqrtm(a) @ a @ spd.invsqrtm(a), np.eye(d), atol=1e-9)
