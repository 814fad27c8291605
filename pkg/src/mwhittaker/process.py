"""Markov dynamics on triangular arrays and their edges.

The triangular process updates row by row.  With ``W^i_j(n)`` independent
inverse Wishart matrices of shape ``alpha(n) + beta_i``:

* ``X^1_1(n) = T_{X^1_1(n-1)}(W)``
* ``X^i_1(n) = T_{X^{i-1}_1(n) + X^i_1(n-1)}(W)``
* ``X^i_i(n) = [X^{i-1}_{i-1}(n-1)^{-1} + T_{X^i_i(n-1)}(W)^{-1}]^{-1}``
* ``X^i_j(n) = [X^{i-1}_{j-1}(n-1)^{-1} + T_{X^{i-1}_j(n) + X^i_j(n-1)}(W)^{-1}]^{-1}``

The right edge ``Z^i = X^i_1`` and the inverse left edge ``L^i = (X^i_i)^{-1}``
evolve autonomously and are simulated directly from step initial data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ._backend import kernels as _kern
from .kernels import q_update
from .quad import nested_de_log_integral
from .rand import RngStream, WishartParams, sample_inverse_wishart, sample_wishart
from .spd import DomainError, expm_sym, inv, log_mvgamma, logdet, sym_mult
from .triangle import TriangularArray, flat_index

__all__ = [
    "AlphaSchedule",
    "draw_innovations",
    "step_triangular",
    "simulate_triangular",
    "simulate_right_edge",
    "simulate_left_edge",
    "polymer_partition",
    "strict_weak_partition",
    "MCMCConfig",
    "SigmaBarSample",
    "sample_sigma_bar",
    "sample_sigma_bar_exact",
    "DoobChain",
    "compose_U",
]


class AlphaSchedule:
    """Time-dependent parameter ``n -> alpha(n)`` for ``n >= 1``.

    Built from a constant, a sequence (``alpha(n) = seq[n-1]``, then
    ``default``), or a schedule file with lines ``n alpha_n`` and an optional
    ``default alpha`` line.
    """

    def __init__(self, values=None, default=None):
        self.values = {}
        if values is None:
            pass
        elif np.isscalar(values):
            default = float(values)
        else:
            self.values = {n + 1: float(a) for n, a in enumerate(values)}
        self.default = None if default is None else float(default)

    def __call__(self, n):
        if n < 1:
            raise ValueError("schedule is indexed from n = 1")
        if n in self.values:
            return self.values[n]
        if self.default is None:
            raise DomainError(f"schedule has no value for n = {n} and no default")
        return self.default

    def first(self, n):
        return [self(k) for k in range(1, n + 1)]

    @classmethod
    def parse(cls, text):
        out = cls()
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, val = line.split()
            if key.lower() == "default":
                out.default = float(val)
            else:
                out.values[int(key)] = float(val)
        return out

    def to_dict(self):
        return {"values": {str(k): v for k, v in sorted(self.values.items())}, "default": self.default}

    @classmethod
    def from_dict(cls, data):
        out = cls(default=data.get("default"))
        out.values = {int(k): float(v) for k, v in data.get("values", {}).items()}
        return out


def _as_schedule(alpha):
    return alpha if isinstance(alpha, AlphaSchedule) else AlphaSchedule(alpha)


def _check_params(alpha_n, beta, d):
    for b in beta:
        if not alpha_n + b > (d - 1) / 2:
            raise DomainError(f"alpha(n) + beta_i must exceed {(d - 1) / 2}; got {alpha_n + b}")


def draw_innovations(alpha_n, beta, d, batch, rng, inverse=True):
    """Row-wise innovations: row ``i`` is ``(batch, i, d, d)`` with shape parameter ``alpha_n + beta_i``."""
    _check_params(alpha_n, beta, d)
    sampler = sample_inverse_wishart if inverse else sample_wishart
    return [sampler(WishartParams(alpha_n + beta[i], d), rng, size=(batch, i + 1)) for i in range(len(beta))]


def step_triangular(x, w_rows):
    """One step of the triangular dynamic with given innovations (any ``d``)."""
    rows = []
    for i, r in enumerate(x.rows):
        if i == 0:
            rows.append(sym_mult(r, w_rows[0]))
        else:
            rows.append(q_update(x.rows[i - 1], rows[i - 1], r, w_rows[i]))
    return TriangularArray(rows)


@dataclass
class Trajectory:
    """Arrays ``X(0), ..., X(n)``; each is a batch of triangular arrays."""

    arrays: list

    def __len__(self):
        return len(self.arrays)

    @property
    def final(self):
        return self.arrays[-1]

    def bottom_rows(self):
        """Array ``(n+1, batch..., N, d, d)`` of bottom rows."""
        return np.stack([a.bottom for a in self.arrays])


def simulate_triangular(x0, alpha, beta, n_steps, rng, use_kernel=True):
    """Run the triangular dynamic from ``x0`` (a batch of arrays with batch shape ``(B,)``)."""
    sched = _as_schedule(alpha)
    N, d = x0.N, x0.d
    if len(beta) != N:
        raise ValueError("beta must have one entry per row")
    if x0.batch_shape == ():
        x0 = x0[None]
    B = x0.batch_shape[0]
    innov = [draw_innovations(sched(n), beta, d, B, rng) for n in range(1, n_steps + 1)]
    if d == 1 and use_kernel:
        ws = np.ascontiguousarray(np.stack([np.concatenate([r[..., 0, 0] for r in w], axis=-1) for w in innov]))
        flat = _kern.tri_run_d1(np.ascontiguousarray(x0.to_flat()), ws.reshape(n_steps, B, -1))
        return Trajectory([TriangularArray.from_flat(f, N) for f in flat])
    arrays = [x0]
    for w in innov:
        arrays.append(step_triangular(arrays[-1], w))
    return Trajectory(arrays)


def _edge_init(N, d, batch, z0):
    out0 = np.zeros((batch, N, d, d))
    if z0 is None:
        out0[:, 0] = np.eye(d)
    else:
        out0[:] = z0
    return out0


def simulate_right_edge(N, d, alpha, beta, n_steps, rng, batch=1, innovations=None, z0=None):
    """Right edge ``Z``, by default from ``Z(0) = (I, 0, ..., 0)``; returns ``(n+1, batch, N, d, d)``.

    ``innovations`` may supply the inverse Wishart draws as ``(n, batch, N, d, d)``.
    """
    sched = _as_schedule(alpha)
    out = np.zeros((n_steps + 1, batch, N, d, d))
    out[0] = _edge_init(N, d, batch, z0)
    for n in range(1, n_steps + 1):
        if innovations is None:
            _check_params(sched(n), beta, d)
            v = [sample_inverse_wishart(WishartParams(sched(n) + beta[i], d), rng, size=batch) for i in range(N)]
        else:
            v = [innovations[n - 1, :, i] for i in range(N)]
        out[n, :, 0] = sym_mult(out[n - 1, :, 0], v[0])
        for i in range(1, N):
            out[n, :, i] = sym_mult(out[n, :, i - 1] + out[n - 1, :, i], v[i])
    return out


def simulate_left_edge(N, d, alpha, beta, n_steps, rng, batch=1, innovations=None, l0=None):
    """Inverse left edge ``L`` with Wishart innovations, by default from ``L(0) = (I, 0, ..., 0)``.

    ``L^i(n) = L^{i-1}(n-1) + T_{L^i(n-1)}(U^i(n))``; returns ``(n+1, batch, N, d, d)``.
    """
    sched = _as_schedule(alpha)
    out = np.zeros((n_steps + 1, batch, N, d, d))
    out[0] = _edge_init(N, d, batch, l0)
    for n in range(1, n_steps + 1):
        if innovations is None:
            _check_params(sched(n), beta, d)
            u = [sample_wishart(WishartParams(sched(n) + beta[i], d), rng, size=batch) for i in range(N)]
        else:
            u = [innovations[n - 1, :, i] for i in range(N)]
        out[n, :, 0] = sym_mult(out[n - 1, :, 0], u[0])
        for i in range(1, N):
            out[n, :, i] = out[n - 1, :, i - 1] + sym_mult(out[n - 1, :, i], u[i])
    return out


def polymer_partition(weights):
    """Up/right lattice-path partition functions for scalar weights ``(B, n, N)``; see ``_pykernels``."""
    return _kern.polymer_dp_d1(np.ascontiguousarray(weights, dtype=float))


def strict_weak_partition(weights):
    """Strict-weak path partition functions for scalar weights ``(B, n, N)``."""
    return _kern.strict_weak_dp_d1(np.ascontiguousarray(weights, dtype=float))


# --- sampling the inner rows given the bottom row -------------------------

@dataclass(frozen=True)
class MCMCConfig:
    """Random-walk Metropolis settings; ``sigma0`` is the initial log-scale step."""

    burn_in: int = 5000
    thin: int = 10
    target_accept: float = 0.3
    adapt_every: int = 50
    sigma0: float = 0.5


@dataclass
class SigmaBarSample:
    """Draws of the inner rows with their chain diagnostics.

    ``arrays`` has batch shape ``(B, n_draws)``; ``acceptance`` is the post
    burn-in acceptance rate averaged over sites and chains; ``iat`` an
    integrated autocorrelation time (``nan`` when fewer than 20 draws).
    """

    arrays: TriangularArray
    acceptance: float
    iat: float
    converged: bool
    method: str = "mcmc"


def _initial_log_inner(lz):
    # geometric means of the bottom entries below each inner entry
    B, N = lz.shape
    out = np.empty((B, N * (N - 1) // 2))
    for i in range(1, N):
        for j in range(1, i + 1):
            out[:, flat_index(i, j)] = lz[:, j - 1:j - 1 + N - i + 1].mean(axis=1)
    return out


def _iat(series):
    x = np.asarray(series, dtype=float)
    x = x - x.mean()
    n = x.size
    if n < 20 or not np.any(x):
        return float("nan")
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf = acf / acf[0]
    tau = 1.0
    for k in range(1, n):
        tau += 2 * acf[k]
        if k >= 5 * tau:
            break
    return float(tau)


def _sweeps_d1(u, lz, beta, sigma, S, gen):
    F, B = u.shape[1], u.shape[0]
    normals = gen.standard_normal((S, F, B))
    uniforms = gen.random((S, F, B))
    return _kern.sigma_sweeps_d1(u, lz, beta, sigma, normals, uniforms)


def sample_sigma_bar(z, beta, rng, n_draws=1, config=MCMCConfig()):
    """Sample inner rows from ``Sigma_beta(z; .) / psi_beta(z)`` by Metropolis within Gibbs.

    ``z`` is a batch of bottom rows ``(B, N, d, d)`` (one chain each) or a single
    row ``(N, d, d)``.  Proposals are ``x -> T_x(exp(sigma S))`` with ``S`` a
    symmetric Gaussian; this move is symmetric for ``mu``, and for ``d = 1`` it
    is the log-space random walk.  Step sizes adapt towards the target
    acceptance during burn-in.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 3:
        z = z[None]
    B, N, d = z.shape[0], z.shape[1], z.shape[-1]
    beta = np.ascontiguousarray(beta, dtype=float)
    if N == 1:
        rows = [np.broadcast_to(z[:, None], (B, n_draws, 1, d, d)).copy()]
        return SigmaBarSample(TriangularArray(rows), 1.0, float("nan"), True, "trivial")
    gen = rng.generator if isinstance(rng, RngStream) else rng
    if d == 1:
        return _sigma_bar_d1(z[..., 0, 0], beta, gen, n_draws, config)
    return _sigma_bar_matrix(z, beta, gen, n_draws, config)


def _adapt(sigma, acc, n, target):
    rate = acc / n
    return sigma * np.exp(np.clip(rate - target, -0.5, 0.5))


def _sigma_bar_d1(zs, beta, gen, n_draws, cfg):
    B, N = zs.shape
    lz = np.ascontiguousarray(np.log(zs))
    u = np.ascontiguousarray(_initial_log_inner(lz))
    F = u.shape[1]
    sigma = np.full((B, F), cfg.sigma0)
    done = 0
    while done < cfg.burn_in:
        S = min(cfg.adapt_every, cfg.burn_in - done)
        acc = _sweeps_d1(u, lz, beta, sigma, S, gen)
        sigma = np.ascontiguousarray(_adapt(sigma, acc, S, cfg.target_accept))
        done += S
    draws = np.empty((B, n_draws, F))
    acc_tot = np.zeros((B, F))
    for k in range(n_draws):
        acc_tot += _sweeps_d1(u, lz, beta, sigma, cfg.thin, gen)
        draws[:, k] = u
    rate = float(acc_tot.mean() / cfg.thin / n_draws)
    inner = np.exp(draws)
    full = np.concatenate([inner, np.broadcast_to(zs[:, None, :], (B, n_draws, N))], axis=-1)
    arr = TriangularArray.from_flat(full, N)
    iat = _iat(draws[0, :, 0]) if n_draws >= 20 else float("nan")
    return SigmaBarSample(arr, rate, iat, 0.1 < rate < 0.6)


def _site_logp_matrix(x, i, j, rows, z, beta):
    # local log target for entry (i, j) (1-based, i < N) with value x (B, d, d)
    N = z.shape[1]

    def val(r, c):
        return z[:, c - 1] if r == N else rows[r - 1][:, c - 1]

    p = beta[i] - beta[i - 1]
    xi = inv(x)
    out = p * logdet(x)
    out = out - np.trace(val(i + 1, j + 1) @ xi, axis1=-2, axis2=-1)
    out = out - np.trace(np.linalg.solve(val(i + 1, j), x), axis1=-2, axis2=-1)
    if j >= 2:
        out = out - np.trace(np.linalg.solve(val(i - 1, j - 1), x), axis1=-2, axis2=-1)
    if j <= i - 1:
        out = out - np.trace(val(i - 1, j) @ xi, axis1=-2, axis2=-1)
    return out


def _sigma_bar_matrix(z, beta, gen, n_draws, cfg):
    B, N, d = z.shape[0], z.shape[1], z.shape[-1]
    lz = logdet(z) / d
    u0 = _initial_log_inner(lz)
    rows = [np.exp(u0[:, flat_index(i, 1):flat_index(i, 1) + i])[..., None, None] * np.eye(d)
            for i in range(1, N)]
    F = N * (N - 1) // 2
    sigma = np.full((B, F), cfg.sigma0)
    sites = [(i, j) for i in range(1, N) for j in range(1, i + 1)]

    def sweep(n_sweeps):
        acc = np.zeros((B, F))
        for _ in range(n_sweeps):
            for k, (i, j) in enumerate(sites):
                x = rows[i - 1][:, j - 1]
                g = gen.standard_normal((B, d, d))
                s = 0.5 * (g + np.swapaxes(g, -1, -2))
                prop = sym_mult(x, expm_sym(sigma[:, k, None, None] * s))
                lo = _site_logp_matrix(x, i, j, rows, z, beta)
                ln = _site_logp_matrix(prop, i, j, rows, z, beta)
                ok = np.log(gen.random(B)) < ln - lo
                rows[i - 1][ok, j - 1] = prop[ok]
                acc[:, k] += ok
        return acc

    done = 0
    while done < cfg.burn_in:
        S = min(cfg.adapt_every, cfg.burn_in - done)
        sigma = _adapt(sigma, sweep(S), S, cfg.target_accept)
        done += S
    out_rows = [np.empty((B, n_draws, i, d, d)) for i in range(1, N)]
    acc_tot = np.zeros((B, F))
    trace = []
    for k in range(n_draws):
        acc_tot += sweep(cfg.thin)
        for i in range(N - 1):
            out_rows[i][:, k] = rows[i]
        trace.append(float(logdet(rows[0][0, 0])))
    rate = float(acc_tot.mean() / cfg.thin / n_draws)
    out_rows.append(np.broadcast_to(z[:, None], (B, n_draws, N, d, d)).copy())
    iat = _iat(trace) if n_draws >= 20 else float("nan")
    return SigmaBarSample(TriangularArray(out_rows), rate, iat, 0.1 < rate < 0.6)


def sample_sigma_bar_exact(z, beta, rng):
    """Exact draw for ``d = 1``, ``N = 2``: the inner entry is generalised inverse Gaussian.

    Its density is proportional to ``x^{beta_2 - beta_1} e^{-z_2/x - x/z_1}``
    w.r.t. ``dx/x``.  ``z`` has shape ``(B, 2)`` or ``(B, 2, 1, 1)``.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 4:
        z = z[..., 0, 0]
    if z.shape[-1] != 2:
        raise DomainError("exact sampler is for N = 2")
    beta = np.asarray(beta, dtype=float)
    gen = rng.generator if isinstance(rng, RngStream) else rng
    p = beta[1] - beta[0]
    scale = np.sqrt(z[:, 0] * z[:, 1])
    omega = 2.0 * np.sqrt(z[:, 1] / z[:, 0])
    x = stats.geninvgauss.rvs(p, omega, size=z.shape[0], random_state=gen) * scale
    return TriangularArray([x[:, None, None, None], z[:, :, None, None]])


# --- the Doob-transformed bottom-row chain -------------------------------

@dataclass
class DoobChain:
    """Composition of ``n`` Doob-transformed ``P`` kernels.

    Sampling starts inner rows from ``Sigma_beta(z; .)/psi_beta(z)`` and runs
    the triangular dynamic; the bottom row is then a draw of the chain.
    """

    alpha: AlphaSchedule
    beta: tuple
    n: int
    mcmc: MCMCConfig = field(default_factory=MCMCConfig)

    def initial_arrays(self, z, n_samples, rng, method="auto"):
        z = np.asarray(z, dtype=float)
        N, d = z.shape[-3], z.shape[-1]
        zb = np.broadcast_to(z, (n_samples,) + z.shape[-3:])
        if N == 1:
            return TriangularArray([zb.copy()])
        if method == "auto":
            method = "exact" if d == 1 and N == 2 else "mcmc"
        if method == "exact":
            return sample_sigma_bar_exact(zb, self.beta, rng)
        s = sample_sigma_bar(zb, self.beta, rng, n_draws=1, config=self.mcmc)
        return s.arrays[:, 0]

    def sample(self, z, n_samples, rng, method="auto", full=False):
        """Bottom rows after ``n`` steps from ``z``; ``full`` returns the whole trajectory."""
        x0 = self.initial_arrays(z, n_samples, rng, method)
        traj = simulate_triangular(x0, self.alpha, self.beta, self.n, rng)
        return traj if full else traj.final.bottom

    def log_density(self, z, zt, log_psi=None, rtol=1e-9):
        """``log U(z; zt)`` for ``d = 1`` and ``N <= 2`` by quadrature over intermediate states.

        ``zt`` may be a batch ``(..., N)``.  ``log_psi`` defaults to the
        quadrature Whittaker evaluator.
        """
        from .whittaker import log_psi_quadrature

        if log_psi is None:
            log_psi = lambda lam, x: log_psi_quadrature(lam, x, rtol)
        z = np.asarray(z, dtype=float).reshape(-1)
        zt = np.asarray(zt, dtype=float)
        N = z.size
        if N > 2:
            raise DomainError("log_density supports N <= 2")
        beta = np.asarray(self.beta, dtype=float)
        alphas = self.alpha.first(self.n)
        norm = sum(log_mvgamma(a + b, 1) for a in alphas for b in beta)
        lz = np.log(z)
        lzt = np.log(zt.reshape(zt.shape[:-1] + (N,)) if zt.shape[-1] == N else zt)
        batch = lzt.shape[:-1]

        def log_p(a, lx, ly):
            # P^N_a(e^lx; e^ly) with log arguments (..., N)
            v = a * (lx - ly).sum(axis=-1) - np.exp(lx - ly).sum(axis=-1)
            if N > 1:
                v = v - np.exp(ly[..., 1:] - lx[..., :-1]).sum(axis=-1)
            return v

        D = (self.n - 1) * N
        if D == 0:
            body = log_p(alphas[0], np.broadcast_to(lz, lzt.shape), lzt)
        else:
            lztx = lzt.reshape(batch + (1,) * D + (N,))

            def log_f(*us):
                u = np.stack(np.broadcast_arrays(*us), axis=-1)
                u = u.reshape(u.shape[:-1] + (self.n - 1, N))
                tot = 0.0
                prev = np.broadcast_to(lz, u.shape[:-2] + (N,))
                for k in range(self.n - 1):
                    tot = tot + log_p(alphas[k], prev, u[..., k, :])
                    prev = u[..., k, :]
                return tot + log_p(alphas[-1], prev, np.broadcast_to(lztx, prev.shape))

            centers = []
            for k in range(self.n - 1):
                for j in range(N):
                    w = (k + 1) / self.n
                    centers.append((1 - w) * lz[j] + w * lzt[..., j])
            cs = [(lambda c, m: (lambda *p: c.reshape(batch + (1,) * m)))(np.asarray(c), m)
                  for m, c in enumerate(centers)]
            ss = [(lambda m: (lambda *p: np.ones(batch + (1,) * m)))(m) for m in range(D)]
            body = nested_de_log_integral(log_f, cs, ss, rtol=rtol)
        ex = np.exp(lzt)
        return body + log_psi(beta, ex) - log_psi(beta, np.exp(lz)) - norm


def compose_U(alpha, beta, n, mcmc=MCMCConfig()):
    """Handle on the ``n``-step bottom-row kernel from time-dependent parameters ``alpha``."""
    sched = _as_schedule(alpha)
    for k in range(1, n + 1):
        _check_params(sched(k), beta, 1)
    return DoobChain(sched, tuple(float(b) for b in beta), n, mcmc)
