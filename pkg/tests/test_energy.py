import numpy as np
import pytest

from mwhittaker.energy import (
    Dag,
    GraphError,
    chain_graph,
    critical_residual,
    energy_chi,
    energy_phi,
    energy_Phi,
    hessian_Phi,
    laplace_integral,
    minimize_Phi,
    parse_graph,
    row_log_dets,
    sym_basis,
    triangular_graph,
)
from mwhittaker.rand import RngStream
from mwhittaker.spd import DomainError, logdet


def test_single_edge_energy_is_trace():
    g = Dag(["a", "b"], [("a", "b")], {"a": np.eye(3), "b": np.eye(3)})
    assert energy_Phi(g, []) == pytest.approx(3.0)


def test_chain_minimiser():
    res = minimize_Phi(chain_graph(1.0, 1.0))
    assert res.value("x")[0, 0] == pytest.approx(1.0)
    assert res.energy == pytest.approx(2.0)
    assert res.certified and res.converged
    # a -> x -> b with values a, b: x = sqrt(ab), energy 2 sqrt(a/b)
    res = minimize_Phi(chain_graph(4.0, 1.0))
    assert res.value("x")[0, 0] == pytest.approx(2.0)
    assert res.energy == pytest.approx(4.0)


def test_triangle_closed_form():
    res = minimize_Phi(triangular_graph(3))
    vals = [res.value(v)[0, 0] for v in [(1, 1), (2, 1), (2, 2)]]
    assert np.allclose(vals, [1.0, np.sqrt(2), 1 / np.sqrt(2)], atol=1e-12)
    assert res.energy == pytest.approx(4 * np.sqrt(2), rel=1e-12)
    assert np.abs(critical_residual(res.graph, res.x)).max() < 1e-10


def test_row_product_law():
    rng = np.random.default_rng(2)
    for N in (3, 4, 5):
        z = np.exp(rng.normal(size=N))
        res = minimize_Phi(triangular_graph(N, list(z)))
        assert np.allclose(row_log_dets(res, N), np.arange(1, N) / N * np.log(z).sum(), atol=1e-9)


def test_matrix_lift_of_scalar_boundary():
    one = minimize_Phi(triangular_graph(3, [2.0, 0.5, 3.0]))
    lift = minimize_Phi(triangular_graph(3, [2.0 * np.eye(2), 0.5 * np.eye(2), 3.0 * np.eye(2)]))
    assert lift.energy == pytest.approx(2 * one.energy)
    for a, b in zip(lift.x, one.x):
        assert np.allclose(a, b[0, 0] * np.eye(2))


def test_phi_chi_relations():
    g = triangular_graph(3, [np.eye(2)] * 3)
    rng = np.random.default_rng(3)
    for _ in range(5):
        s = []
        for _ in g.free:
            a = rng.normal(size=(2, 2))
            s.append(a + a.T)
        # Golden-Thompson: tr e^{A} e^{B} >= tr e^{A+B}
        assert energy_phi(g, s) >= energy_chi(g, s) - 1e-12
    g1 = triangular_graph(3)
    s1 = [np.array([[v]]) for v in rng.normal(size=3)]
    assert energy_phi(g1, s1) == pytest.approx(energy_chi(g1, s1))


def test_hessian_two_rows():
    res = minimize_Phi(triangular_graph(2))
    assert res.hessian.shape == (1, 1)
    assert res.hessian[0, 0] == pytest.approx(2.0)


def test_hessian_matrix_case_is_kronecker():
    # identity boundary at d = 2: the Hessian is the scalar Hessian times the d = 2 metric
    one = minimize_Phi(triangular_graph(3))
    two = minimize_Phi(triangular_graph(3, [np.eye(2)] * 3))
    E = sym_basis(2)
    gram = np.einsum("pab,qba->pq", E, E)
    assert np.allclose(two.hessian, np.kron(one.hessian, gram), atol=1e-10)


def test_hessian_finite_differences():
    g = triangular_graph(3, [np.diag([1.0, 2.0]), np.eye(2), np.diag([3.0, 0.5])])
    rng = np.random.default_rng(4)
    x = []
    for _ in g.free:
        a = rng.normal(size=(2, 2))
        x.append(a @ a.T + 2 * np.eye(2))
    H = hessian_Phi(g, x)
    E = sym_basis(2)
    m = len(E)
    h = 1e-4

    def f(flat):
        return energy_Phi(g, [x[k] + np.einsum("p,pab->ab", flat[k * m:(k + 1) * m], E) for k in range(len(x))])

    n = len(x) * m
    fd = np.zeros((n, n))
    for p in range(n):
        for q in range(n):
            ep, eq = np.eye(n)[p] * h, np.eye(n)[q] * h
            fd[p, q] = (f(ep + eq) - f(ep - eq) - f(eq - ep) + f(-ep - eq)) / (4 * h * h)
    assert np.allclose(H, fd, atol=1e-5)


@pytest.mark.parametrize("N,nv,ne", [(2, 3, 2), (3, 6, 6), (4, 10, 12)])
def test_triangular_graph_counts(N, nv, ne):
    g = triangular_graph(N)
    assert len(g.vertices) == nv and len(g.edges) == ne
    assert len(g.free) == N * (N - 1) // 2


def test_parse_graph():
    g = parse_graph("""
    # chain with a matrix boundary
    a x
    x b
    boundary:
    a 1,0,0,1
    b 2,0,0,2
    """)
    assert g.free == ["x"] and g.d == 2
    res = minimize_Phi(g)
    assert np.allclose(res.value("x"), np.sqrt(2) * np.eye(2))


@pytest.mark.parametrize("text", [
    "a b\nb a\nboundary:\na 1",          # cycle
    "a a\nboundary:\na 1",               # self loop
    "a x\nboundary:\na 1",               # free vertex without a boundary descendant
    "a x y\n",                           # malformed line
    "a x\nx b\nboundary:\na 1,2,3\nb 1",  # not square
])
def test_invalid_graphs(text):
    with pytest.raises(GraphError):
        parse_graph(text)


def test_diagonal_and_general_boundaries():
    g = triangular_graph(3, [np.diag([1.0, 2.0]), np.eye(2), np.diag([3.0, 0.5])])
    res = minimize_Phi(g)
    assert not res.certified
    assert np.abs(critical_residual(g, res.x)).max() < 1e-9
    off = np.array([[2.0, 0.5], [0.5, 1.0]])
    with pytest.raises(DomainError):
        minimize_Phi(triangular_graph(2, [off, np.eye(2)]))
    exp = minimize_Phi(triangular_graph(2, [off, np.eye(2)]), experimental=True)
    assert not exp.certified
    assert np.abs(critical_residual(exp.graph, exp.x)).max() < 1e-6


def test_laplace_ratios():
    g = chain_graph(1.0, 1.0)
    assert abs(laplace_integral(g, 50).ratio - 1) < 0.02
    assert abs(laplace_integral(g, 50, log_g=lambda xs: logdet(xs[0])).ratio - 1) < 0.02
    # the approximation improves with k
    errs = [abs(laplace_integral(triangular_graph(2, [1.0, 3.0]), k).ratio - 1) for k in (5, 40)]
    assert errs[1] < errs[0]


def test_laplace_mc_matrix_chain():
    g = chain_graph(np.eye(2), np.eye(2))
    r = laplace_integral(g, 60, method="mc", n_samples=50_000, rng=RngStream(8, 0))
    assert abs(r.ratio - 1) < 0.05
    with pytest.raises(DomainError):
        laplace_integral(g, 60, method="quadrature")
