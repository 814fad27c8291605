import numpy as np
import pytest
from scipy import stats

from mwhittaker.process import (
    AlphaSchedule,
    compose_U,
    polymer_partition,
    sample_sigma_bar,
    sample_sigma_bar_exact,
    simulate_left_edge,
    simulate_right_edge,
    simulate_triangular,
    step_triangular,
    strict_weak_partition,
)
from mwhittaker.rand import RngStream
from mwhittaker.spd import DomainError
from mwhittaker.triangle import TriangularArray


def col(*v):
    return np.array(v, dtype=float)[:, None, None]


def test_schedule_parse_and_roundtrip():
    s = AlphaSchedule.parse("1 1.5\n2 2.0\n# comment\ndefault 3\n")
    assert s.first(4) == [1.5, 2.0, 3.0, 3.0]
    assert AlphaSchedule.from_dict(s.to_dict()).first(4) == s.first(4)
    with pytest.raises(DomainError):
        AlphaSchedule([1.0, 2.0])(3)


def test_hand_computed_step():
    x = TriangularArray([col(1.0), col(1.0, 1.0)])
    w = [col(2.0)[None].reshape(1, 1, 1), col(1.0, 3.0)]
    y = step_triangular(x, w)
    assert y.rows[0][0, 0, 0] == pytest.approx(2.0)
    assert y.rows[1][:, 0, 0].tolist() == pytest.approx([3.0, 0.75])


def test_parameter_constraint():
    x = TriangularArray([np.eye(2)[None, None], np.broadcast_to(np.eye(2), (1, 2, 2, 2))])
    with pytest.raises(DomainError):
        simulate_triangular(x, 0.1, [0.0, 0.2], 1, RngStream(0))


def test_kernel_path_equals_generic_path():
    x = TriangularArray.constant(3, 1, batch_shape=(50,))
    a = simulate_triangular(x, 1.2, [0.3, 0.5, 0.9], 6, RngStream(5), use_kernel=True)
    b = simulate_triangular(x, 1.2, [0.3, 0.5, 0.9], 6, RngStream(5), use_kernel=False)
    assert np.allclose(a.bottom_rows(), b.bottom_rows(), rtol=1e-12)


def test_top_particle_is_a_walk(rng):
    x = TriangularArray.constant(2, 1, batch_shape=(20_000,))
    tr = simulate_triangular(x, 1.5, [0.5, 1.0], 3, rng)
    top = np.log(tr.final.rows[0][:, 0, 0, 0])
    # log of a product of three independent inverse-gamma(2) variables
    ref = -np.log(rng.gamma(2.0, size=(20_000, 3))).sum(axis=1)
    assert stats.ks_2samp(top, ref).pvalue > 0.01


def test_right_edge_couples_with_triangle():
    # driven by the same innovations, the entries (i, 1) follow the right-edge recursion exactly
    from mwhittaker.process import draw_innovations

    N, d, n = 3, 2, 4
    rng = RngStream(9)
    beta = [0.2, 0.4, 0.7]
    x = TriangularArray([np.broadcast_to(np.eye(d), (1, i, d, d)).copy() for i in range(1, N + 1)])
    firsts = [np.stack([r[:, 0] for r in x.rows], axis=1)]
    ws = []
    for _ in range(n):
        w = draw_innovations(1.6, beta, d, 1, rng)
        ws.append(np.stack([r[:, 0] for r in w], axis=1))
        x = step_triangular(x, w)
        firsts.append(np.stack([r[:, 0] for r in x.rows], axis=1))
    z = simulate_right_edge(N, d, 1.6, beta, n, rng, 1, innovations=np.stack(ws), z0=firsts[0])
    assert np.array_equal(z, np.stack(firsts))


def test_polymer_partitions_small_cases():
    ones = np.ones((1, 2, 2))
    assert polymer_partition(ones)[0, 2, 1] == pytest.approx(2.0)
    # strict-weak: from (0, 1) two steps to level 2 need exactly one diagonal; H then D or D then H
    assert strict_weak_partition(ones)[0, 2, 1] == pytest.approx(2.0)
    v = np.array([[[3.7]]])
    assert polymer_partition(v)[0, 1, 0] == pytest.approx(3.7)


def test_left_edge_diagonal_is_wishart_sum(rng):
    # L^i(i) = U^1(1) + ... + U^i(i), Wishart with parameter sum(alpha + beta_j)
    N, d = 3, 2
    beta = [0.3, 0.5, 0.8]
    lft = simulate_left_edge(N, d, 1.4, beta, N, rng, 40_000)
    m = lft[N, :, N - 1].mean(axis=0)
    assert np.allclose(m, (3 * 1.4 + sum(beta)) * np.eye(d), rtol=0.02, atol=0.05)
    for i in range(1, N):
        assert np.allclose(lft[i - 1, :, i], 0.0)


def test_sigma_bar_d1_marginal(rng):
    z = np.array([1.0, 2.0])[:, None, None]
    beta = (0.5, 1.0)
    s = sample_sigma_bar(np.broadcast_to(z, (5000, 2, 1, 1)), beta, rng)
    assert 0.1 <= s.acceptance <= 0.6
    assert np.allclose(s.arrays[:, 0].bottom[..., 0, 0], [1.0, 2.0])
    x = s.arrays[:, 0].rows[0][:, 0, 0, 0]
    exact = sample_sigma_bar_exact(np.broadcast_to(z, (5000, 2, 1, 1)), beta, rng).rows[0][:, 0, 0, 0]
    assert stats.ks_2samp(x, exact).pvalue > 0.01
    # inner density x^{p} exp(-(z2/x + x/z1)) dx/x, p = beta_2 - beta_1: a generalised inverse Gaussian
    ref = stats.geninvgauss(0.5, 2 * np.sqrt(2.0), scale=np.sqrt(2.0))
    assert stats.kstest(exact, ref.cdf).pvalue > 0.01


def test_sigma_bar_single_row(rng):
    s = sample_sigma_bar(np.eye(2)[None], (0.5,), rng)
    assert s.arrays.N == 1


def bessel_psi(lam, x):
    from mwhittaker.verify import _log_psi2_oracle

    x = np.asarray(x, dtype=float)
    return _log_psi2_oracle(lam, np.log(x[..., 0]), np.log(x[..., 1]))


def test_doob_chain_density_normalised():
    chain = compose_U(1.5, (0.5, 1.0), 1)
    from mwhittaker.quad import nested_de_log_integral

    def f(u1, u2):
        zt = np.stack(np.broadcast_arrays(np.exp(u1), np.exp(u2)), -1)
        return chain.log_density([1.0, 2.0], zt, log_psi=bessel_psi)

    assert float(nested_de_log_integral(f, [0.0, 0.5], [1.0, 1.0], rtol=1e-7)) == pytest.approx(0.0, abs=1e-5)


def test_chapman_kolmogorov_one_row():
    from mwhittaker.quad import de_log_integral

    sched = AlphaSchedule([1.2, 2.0])
    one = compose_U(sched, (0.5,), 1)
    two = compose_U(sched, (0.5,), 2)
    second = compose_U(AlphaSchedule(2.0), (0.5,), 1)
    zt = np.array([[0.3], [1.0], [4.0]])

    def log_f(u):
        out = one.log_density([1.0], np.exp(u)[..., None])
        for i in range(u.shape[0]):
            out[i] += np.array([second.log_density([np.exp(v)], zt[i]) for v in u[i]])
        return out

    conv = de_log_integral(log_f, np.zeros(3), 1.0, rtol=1e-9)
    assert np.allclose(two.log_density([1.0], zt), conv, atol=1e-6)
