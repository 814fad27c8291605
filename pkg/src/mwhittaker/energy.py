"""Energy functions on directed acyclic graphs and their minimisers.

A :class:`Dag` has vertex set ``V``, edges ``v -> w`` and a boundary
``Gamma`` subset of ``V`` carrying fixed values.  For an assignment ``x`` of
positive definite matrices to the vertices we consider

* ``Phi(x) = sum_{v->w} tr[x_v x_w^{-1}]``,
* ``phi(s) = sum_{v->w} tr[e^{s_v} e^{-s_w}]`` on symmetric matrices,
* ``chi(s) = sum_{v->w} tr[e^{s_v - s_w}]``.

For scalar boundary data the minimiser of ``Phi`` is the lift of the ``d=1``
minimiser, which is found by Newton's method on the strictly convex function
``phi`` in log coordinates.
"""

from __future__ import annotations

import graphlib
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .spd import DomainError, as_sym, expm_sym, inv, logdet
from .quad import nested_de_log_integral
from .mc import estimate_from_log_weights

__all__ = [
    "Dag",
    "triangular_graph",
    "chain_graph",
    "parse_graph",
    "MinimizerResult",
    "minimize_phi1",
    "minimize_Phi",
    "energy_Phi",
    "energy_phi",
    "energy_chi",
    "critical_residual",
    "hessian_Phi",
    "sym_basis",
    "row_log_dets",
    "LaplaceResult",
    "laplace_log_rhs",
    "laplace_integral",
]


class GraphError(ValueError):
    """Invalid graph: cycle, unknown vertex, or a free vertex not pinned by the boundary."""


@dataclass
class Dag:
    """Directed acyclic graph with boundary values.

    ``boundary`` maps a boundary vertex to a positive scalar or a positive
    definite matrix.  Free vertices are kept in insertion order.
    """

    vertices: list
    edges: list
    boundary: dict

    def __post_init__(self):
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise GraphError("duplicate vertices")
        for v, w in self.edges:
            if v not in vs or w not in vs:
                raise GraphError(f"edge {v}->{w} uses an unknown vertex")
            if v == w:
                raise GraphError(f"self loop at {v}")
        if not set(self.boundary) <= vs:
            raise GraphError("boundary contains unknown vertices")
        ts = graphlib.TopologicalSorter({v: [] for v in self.vertices})
        for v, w in self.edges:
            ts.add(w, v)
        try:
            tuple(ts.static_order())
        except graphlib.CycleError as exc:
            raise GraphError("graph has a directed cycle") from exc
        self.free = [v for v in self.vertices if v not in self.boundary]
        self._check_pinned()

    def _reach(self, forward):
        adj = {v: [] for v in self.vertices}
        for v, w in self.edges:
            if forward:
                adj[v].append(w)
            else:
                adj[w].append(v)
        hit = set(self.boundary)
        # vertices with a directed path into (forward) or from (backward) the boundary
        changed = True
        while changed:
            changed = False
            for v in self.vertices:
                if v not in hit and any(u in hit for u in adj[v]):
                    hit.add(v)
                    changed = True
        return hit

    def _check_pinned(self):
        down = self._reach(True)
        up = self._reach(False)
        for v in self.free:
            if v not in down or v not in up:
                raise GraphError(f"free vertex {v!r} needs a boundary ancestor and a boundary descendant")

    @property
    def d(self):
        v = next(iter(self.boundary.values()))
        return 1 if np.ndim(v) == 0 else np.shape(v)[-1]

    def boundary_matrices(self):
        d = self.d
        return {v: (np.asarray(b, dtype=float).reshape(1, 1) if d == 1 else np.asarray(b, dtype=float))
                for v, b in self.boundary.items()}


def triangular_graph(N, boundary=None):
    """Graph of the Whittaker energy: vertices ``(i, j)``, ``1 <= j <= i <= N``.

    Edges ``(i, j) -> (i+1, j)`` and ``(i+1, j+1) -> (i, j)``; the boundary
    is row ``N`` with values ``boundary`` (ones by default).
    """
    verts = [(i, j) for i in range(1, N + 1) for j in range(1, i + 1)]
    edges = []
    for i in range(1, N):
        for j in range(1, i + 1):
            edges.append(((i, j), (i + 1, j)))
            edges.append(((i + 1, j + 1), (i, j)))
    if boundary is None:
        boundary = [1.0] * N
    return Dag(verts, edges, {(N, j): boundary[j - 1] for j in range(1, N + 1)})


def chain_graph(left=1.0, right=1.0):
    """``a -> x -> b`` with a single free vertex ``x``."""
    return Dag(["a", "x", "b"], [("a", "x"), ("x", "b")], {"a": left, "b": right})


def parse_graph(text):
    """Parse ``v w`` edge lines followed by a ``boundary:`` section of ``v value`` lines.

    Values are scalars, or ``d*d`` comma-separated entries for matrices.
    Lines starting with ``#`` are ignored.
    """
    edges, boundary, verts = [], {}, []
    in_boundary = False
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.lower().rstrip(":") == "boundary":
            in_boundary = True
            continue
        parts = line.split()
        if len(parts) != 2:
            raise GraphError(f"cannot parse line {raw!r}")
        if in_boundary:
            vals = [float(t) for t in parts[1].split(",")]
            if len(vals) == 1:
                boundary[parts[0]] = vals[0]
            else:
                d = int(round(np.sqrt(len(vals))))
                if d * d != len(vals):
                    raise GraphError(f"boundary value for {parts[0]} is not a square matrix")
                boundary[parts[0]] = np.array(vals).reshape(d, d)
        else:
            edges.append((parts[0], parts[1]))
        for p in ([parts[0]] if in_boundary else parts):
            if p not in verts:
                verts.append(p)
    return Dag(verts, edges, boundary)


# --- energies -------------------------------------------------------------

def _full(g, x_free):
    # vertex -> matrix for all vertices
    out = dict(g.boundary_matrices())
    for v, m in zip(g.free, x_free):
        out[v] = np.asarray(m, dtype=float)
    return out


def energy_Phi(g, x_free):
    """``Phi`` with the free vertices set to ``x_free`` (list of matrices, same order as ``g.free``)."""
    x = _full(g, x_free)
    return float(sum(np.trace(x[v] @ inv(x[w])) for v, w in g.edges))


def energy_phi(g, s_free):
    """``phi`` in log coordinates; boundary values enter through their matrix logarithm."""
    from .spd import logm_sym

    s = {v: logm_sym(m) for v, m in g.boundary_matrices().items()}
    s.update({v: np.asarray(m, dtype=float) for v, m in zip(g.free, s_free)})
    return float(sum(np.trace(expm_sym(s[v]) @ expm_sym(-s[w])) for v, w in g.edges))


def energy_chi(g, s_free):
    """``chi`` in log coordinates."""
    from .spd import logm_sym

    s = {v: logm_sym(m) for v, m in g.boundary_matrices().items()}
    s.update({v: np.asarray(m, dtype=float) for v, m in zip(g.free, s_free)})
    return float(sum(np.trace(expm_sym(s[v] - s[w])) for v, w in g.edges))


def critical_residual(g, x_free):
    """Residuals ``x_v^{-1} (sum_{u->v} x_u) x_v^{-1} - sum_{v->w} x_w^{-1}`` at each free vertex."""
    x = _full(g, x_free)
    d = next(iter(x.values())).shape[-1]
    res = []
    for v in g.free:
        inc = sum((x[u] for u, w in g.edges if w == v), np.zeros((d, d)))
        out = sum((inv(x[w]) for u, w in g.edges if u == v), np.zeros((d, d)))
        xi = inv(x[v])
        res.append(xi @ inc @ xi - out)
    return np.array(res)


# --- scalar minimisation --------------------------------------------------

@dataclass
class MinimizerResult:
    """Minimiser of ``Phi`` over the free vertices.

    ``x`` lists the minimising matrices in the order of ``graph.free``.
    ``certified`` is False for results outside the scalar-boundary theory.
    """

    graph: Dag
    x: list
    energy: float
    grad_norm: float
    iterations: int
    converged: bool
    certified: bool = True
    log_x: np.ndarray | None = None
    _hessian: np.ndarray | None = field(default=None, repr=False)

    @property
    def d(self):
        return self.x[0].shape[-1] if self.x else self.graph.d

    def value(self, v):
        return self.x[self.graph.free.index(v)]

    @property
    def hessian(self):
        if self._hessian is None:
            self._hessian = hessian_Phi(self.graph, self.x)
        return self._hessian

    @property
    def log_det_hessian(self):
        sign, ld = np.linalg.slogdet(self.hessian)
        if sign <= 0:
            raise DomainError("Hessian is not positive definite")
        return float(ld)


def _phi1_parts(g, u_bnd):
    # edge table: free index (or -1) and boundary log value for both ends
    idx = {v: i for i, v in enumerate(g.free)}
    iv = np.array([idx.get(v, -1) for v, _ in g.edges], dtype=int)
    iw = np.array([idx.get(w, -1) for _, w in g.edges], dtype=int)
    cv = np.array([u_bnd.get(v, 0.0) for v, _ in g.edges], dtype=float)
    cw = np.array([u_bnd.get(w, 0.0) for _, w in g.edges], dtype=float)
    return iv, iw, cv, cw


def _phi1_eval(u, iv, iw, cv, cw, with_derivs=True):
    uv = np.where(iv >= 0, u[np.maximum(iv, 0)], cv)
    uw = np.where(iw >= 0, u[np.maximum(iw, 0)], cw)
    t = np.exp(uv - uw)
    f = t.sum()
    if not with_derivs:
        return f
    n = u.size
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    mv, mw = iv >= 0, iw >= 0
    np.add.at(grad, iv[mv], t[mv])
    np.add.at(grad, iw[mw], -t[mw])
    np.add.at(hess, (iv[mv], iv[mv]), t[mv])
    np.add.at(hess, (iw[mw], iw[mw]), t[mw])
    both = mv & mw
    np.add.at(hess, (iv[both], iw[both]), -t[both])
    np.add.at(hess, (iw[both], iv[both]), -t[both])
    return f, grad, hess


def minimize_phi1(g, log_boundary=None, tol=1e-12, max_iter=200, armijo=1e-4):
    """Newton's method with Armijo backtracking for the scalar energy in log coordinates.

    Returns the log-minimiser ``u`` (order of ``g.free``), the energy, the
    sup-norm of the gradient and the iteration count.
    """
    if log_boundary is None:
        log_boundary = {v: float(np.log(b)) for v, b in g.boundary.items()}
    iv, iw, cv, cw = _phi1_parts(g, log_boundary)
    u = np.full(len(g.free), float(np.mean(list(log_boundary.values()))))
    f, grad, hess = _phi1_eval(u, iv, iw, cv, cw)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(grad)) < tol:
            break
        step = -np.linalg.solve(hess, grad)
        slope = grad @ step
        t = 1.0
        while True:
            f_new = _phi1_eval(u + t * step, iv, iw, cv, cw, with_derivs=False)
            if f_new <= f + armijo * t * slope or t < 1e-12:
                break
            t *= 0.5
        u = u + t * step
        f, grad, hess = _phi1_eval(u, iv, iw, cv, cw)
    gn = float(np.max(np.abs(grad))) if grad.size else 0.0
    return u, float(f), gn, it


def _scalar_boundary(g):
    # returns the scalar per boundary vertex if every value is c * I, else None
    out = {}
    for v, m in g.boundary_matrices().items():
        c = m[0, 0]
        if not np.allclose(m, c * np.eye(m.shape[0]), rtol=0, atol=1e-14 * abs(c)):
            return None
        out[v] = c
    return out


def _diagonal_boundary(g):
    out = {}
    for v, m in g.boundary_matrices().items():
        if not np.allclose(m, np.diag(np.diag(m)), rtol=0, atol=1e-14 * np.abs(m).max()):
            return None
        out[v] = np.diag(m)
    return out


def minimize_Phi(g, tol=1e-12, experimental=False):
    """Minimise ``Phi`` over the free vertices of ``g``.

    Scalar boundary values (``c I``) reduce to the scalar problem.  Diagonal
    values are solved coordinate by coordinate; that point is the minimiser of
    ``chi`` and a critical point of ``Phi`` (``certified`` is False).  For
    general boundaries an L-BFGS search over Cholesky factors runs only when
    ``experimental=True``.
    """
    d = g.d
    scal = _scalar_boundary(g)
    if scal is not None:
        u, f, gn, it = minimize_phi1(g, {v: float(np.log(c)) for v, c in scal.items()}, tol=tol)
        x = [np.exp(ui) * np.eye(d) for ui in u]
        return MinimizerResult(g, x, d * f, gn, it, gn < max(tol, 1e-10), True, log_x=u)
    diag = _diagonal_boundary(g)
    if diag is not None:
        us, its, gns = [], 0, 0.0
        for k in range(d):
            u, _, gn, it = minimize_phi1(g, {v: float(np.log(c[k])) for v, c in diag.items()}, tol=tol)
            us.append(u)
            its = max(its, it)
            gns = max(gns, gn)
        x = [np.diag(np.exp([us[k][i] for k in range(d)])) for i in range(len(g.free))]
        return MinimizerResult(g, x, energy_Phi(g, x), gns, its, gns < max(tol, 1e-10), False)
    if not experimental:
        raise DomainError("non-diagonal boundary values: pass experimental=True for the uncertified search")
    return _minimize_cholesky(g, tol)


def _minimize_cholesky(g, tol):
    d = g.d
    il = np.tril_indices(d)
    n_free = len(g.free)
    bnd = g.boundary_matrices()
    scale = np.exp(np.mean([logdet(m) / d for m in bnd.values()]))

    def unpack(p):
        ls = np.zeros((n_free, d, d))
        ls[:, il[0], il[1]] = p.reshape(n_free, -1)
        return ls

    def fg(p):
        ls = unpack(p)
        x = [l @ l.T for l in ls]
        full = _full(g, x)
        f = sum(np.trace(full[v] @ inv(full[w])) for v, w in g.edges)
        grads = []
        for i, v in enumerate(g.free):
            xi = inv(full[v])
            gm = sum((inv(full[w]) for u, w in g.edges if u == v), np.zeros((d, d)))
            gm = gm - sum((xi @ full[u] @ xi for u, w in g.edges if w == v), np.zeros((d, d)))
            grads.append((2 * as_sym(gm) @ ls[i])[il])
        return f, np.concatenate(grads)

    p0 = np.tile((np.sqrt(scale) * np.eye(d))[il], n_free)
    res = optimize.minimize(fg, p0, jac=True, method="L-BFGS-B", options={"gtol": tol, "maxiter": 10000})
    ls = unpack(res.x)
    x = [l @ l.T for l in ls]
    gn = float(np.max(np.abs(critical_residual(g, x))))
    return MinimizerResult(g, x, float(res.fun), gn, int(res.nit), bool(res.success), False)


# --- Hessian --------------------------------------------------------------

def sym_basis(d):
    """Basis ``E_ij`` (``i <= j``, row major) of symmetric matrices; ``x = sum a_ij E_ij``."""
    out = []
    for i in range(d):
        for j in range(i, d):
            e = np.zeros((d, d))
            e[i, j] = e[j, i] = 1.0
            out.append(e)
    return np.array(out)


def hessian_Phi(g, x_free, check_critical=False, tol=1e-8):
    """Hessian of ``Phi`` in the Lebesgue coordinates ``a_ij`` (``i <= j``) of the free vertices.

    The coordinate block of vertex ``g.free[k]`` occupies rows
    ``k*m .. (k+1)*m - 1`` with ``m = d(d+1)/2``.
    """
    x = _full(g, x_free)
    d = next(iter(x.values())).shape[-1]
    if check_critical:
        r = np.max(np.abs(critical_residual(g, x_free)))
        if r > tol:
            raise DomainError(f"not a critical point (residual {r:.2e})")
    E = sym_basis(d)
    m = len(E)
    idx = {v: k for k, v in enumerate(g.free)}
    H = np.zeros((len(g.free) * m, len(g.free) * m))
    for v, w in g.edges:
        if w not in idx:
            continue  # Phi is linear in x_v, so only edges into free w contribute second derivatives
        W = inv(x[w])
        M = W @ x[v] @ W
        kw = idx[w]
        # d^2/dx_w^2 of tr[x_v x_w^{-1}]
        blk = np.einsum("ab,qbc,cd,pda->pq", M, E, W, E)
        H[kw * m:(kw + 1) * m, kw * m:(kw + 1) * m] += blk + blk.T
        if v in idx:
            kv = idx[v]
            cross = -np.einsum("pab,bc,qcd,da->pq", E, W, E, W)
            H[kv * m:(kv + 1) * m, kw * m:(kw + 1) * m] += cross
            H[kw * m:(kw + 1) * m, kv * m:(kv + 1) * m] += cross.T
    return H


def row_log_dets(result, N):
    """``log |m^i_1 ... m^i_i|`` for rows ``i = 1..N-1`` of a triangular-graph minimiser."""
    out = []
    for i in range(1, N):
        out.append(sum(float(logdet(result.value((i, j)))) for j in range(1, i + 1)))
    return np.array(out)


# --- Laplace asymptotics --------------------------------------------------

@dataclass
class LaplaceResult:
    """Log of the integral (estimate), log of the Laplace approximation, and their ratio."""

    log_lhs: float
    log_rhs: float
    rel_se: float = 0.0
    method: str = "quadrature"

    @property
    def ratio(self):
        return float(np.exp(self.log_lhs - self.log_rhs))


def laplace_log_rhs(result, k, log_g_at_min=0.0):
    """Log of ``g(m) |H|^{-1/2} prod_v |m_v|^{-(d+1)/2} (2 pi / k)^{F d(d+1)/4} e^{-k Phi(m)}``.

    ``F`` is the number of free vertices; ``H`` the Hessian of ``Phi`` at the
    minimiser ``m`` in Lebesgue coordinates.
    """
    d = result.d
    F = len(result.x)
    mu_factor = -(d + 1) / 2 * sum(float(logdet(m)) for m in result.x)
    return float(
        log_g_at_min
        - 0.5 * result.log_det_hessian
        + mu_factor
        + F * d * (d + 1) / 4 * np.log(2 * np.pi / k)
        - k * result.energy
    )


def laplace_integral(g, k, log_g=None, method="auto", n_samples=200_000, rng=None, rtol=1e-10):
    """Compare ``int g(x) e^{-k Phi(x)} prod_{free v} mu(dx_v)`` with its Laplace approximation.

    ``log_g`` maps a list of free-vertex matrices to a log value (zero when
    omitted).  ``method`` is ``"quadrature"`` (scalar graphs with at most
    three free vertices), ``"mc"`` (importance sampling around the
    minimiser) or ``"auto"``.
    """
    res = minimize_Phi(g)
    d = res.d
    F = len(g.free)
    log_g0 = 0.0 if log_g is None else float(log_g(res.x))
    rhs = laplace_log_rhs(res, k, log_g0)
    if method == "auto":
        method = "quadrature" if d == 1 and F <= 3 else "mc"
    if method == "quadrature":
        if d != 1:
            raise DomainError("quadrature needs d = 1")
        lhs = _laplace_quad(g, k, res, log_g, rtol)
        return LaplaceResult(lhs, rhs, 0.0, "quadrature")
    if rng is None:
        raise ValueError("mc method needs an rng")
    est = _laplace_mc(g, k, res, log_g, n_samples, rng)
    return LaplaceResult(est.log_value, rhs, est.rel_se, "mc")


def _laplace_quad(g, k, res, log_g, rtol):
    u0 = np.array([float(np.log(m[0, 0])) for m in res.x])
    # log coordinates: Hessian of k*phi is D H D with D = diag(m)
    hu = k * res.hessian * np.outer(np.exp(u0), np.exp(u0))
    scales = 1.0 / np.sqrt(np.diag(hu))
    log_b = {v: float(np.log(np.asarray(b).reshape(-1)[0])) for v, b in g.boundary.items()}
    pos = {v: i for i, v in enumerate(g.free)}

    def log_f(*us):
        shape = np.broadcast_shapes(*(np.shape(u) for u in us))
        tot = np.zeros(shape)
        for v, w in g.edges:
            a = us[pos[v]] if v in pos else log_b[v]
            b = us[pos[w]] if w in pos else log_b[w]
            tot = tot - k * np.exp(a - b)
        if log_g is not None:
            xs = [np.exp(np.broadcast_to(u, shape))[..., None, None] for u in us]
            tot = tot + log_g(xs)
        return tot

    return float(nested_de_log_integral(log_f, list(u0), list(scales), rtol=rtol))


def _laplace_mc(g, k, res, log_g, n, rng):
    d = res.d
    F = len(g.free)
    E = sym_basis(d)
    m = len(E)
    cov = np.linalg.inv(k * res.hessian)
    from scipy import stats

    center = np.concatenate([np.array([mm[i, j] for i in range(d) for j in range(i, d)]) for mm in res.x])
    dist = stats.multivariate_t(loc=center, shape=1.5 * cov, df=5.0)
    gen = rng.generator if hasattr(rng, "generator") else rng
    xi = dist.rvs(size=n, random_state=gen).reshape(n, F * m)
    mats = np.einsum("nfp,pab->nfab", xi.reshape(n, F, m), E)
    from .spd import is_spd

    ok = is_spd(mats).all(axis=-1)
    log_w = np.full(n, -np.inf)
    bnd = g.boundary_matrices()
    pos = {v: i for i, v in enumerate(g.free)}
    mm = mats[ok]
    phi = np.zeros(mm.shape[0])
    for v, w in g.edges:
        a = np.broadcast_to(mm[:, pos[v]] if v in pos else bnd[v], mm.shape[:1] + (d, d))
        b = np.broadcast_to(mm[:, pos[w]] if w in pos else bnd[w], mm.shape[:1] + (d, d))
        phi = phi + np.trace(np.linalg.solve(b, a), axis1=-2, axis2=-1)
    lv = -k * phi - (d + 1) / 2 * logdet(mm).sum(axis=-1)
    if log_g is not None:
        lv = lv + np.array([log_g(list(row)) for row in mm])
    log_w[ok] = lv - dist.logpdf(xi[ok])
    return estimate_from_log_weights(log_w)
