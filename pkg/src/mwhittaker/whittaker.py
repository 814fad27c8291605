"""Whittaker functions of matrix arguments.

``psi^N_lam(z)`` integrates ``Delta_lam(x) exp(-Phi(x))`` over the inner rows
of a triangular array with bottom row ``z``.  Three evaluators are provided:

* ``quadrature`` (``d = 1``): nested double-exponential rule in log
  coordinates through ``psi^N = K_{lam_N} psi^{N-1}``;
* ``mc``: importance sampling of the inner rows, drawn bottom-up;
* ``fk``: the Feynman-Kac average over independent inverse Wishart walks.

All return log values.  Bottom rows are arrays of shape ``(..., N, d, d)``;
for ``d = 1`` a trailing ``(..., N)`` array is accepted as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma

from .mc import Estimate, estimate_from_log_weights
from .quad import nested_de_log_integral
from .rand import RngStream, WishartParams, inverse_wishart_logpdf, sample_inverse_wishart
from .spd import DomainError, invsqrtm, log_mvgamma, logdet, sym_mult
from .triangle import TriangularArray, energy, log_delta

__all__ = [
    "as_bottom_row",
    "log_psi_quadrature",
    "log_psi_mc",
    "log_psi_fk",
    "fk_expectation",
    "fk_truncation",
    "lyapunov_exponents",
    "log_psi_trapezoid",
    "log_whittaker_measure",
    "WhittakerEvaluator",
    "r_array",
    "log_psi_at_r",
    "log_asymptotic_rhs",
]


def as_bottom_row(z, N=None):
    """Coerce ``z`` to shape ``(..., N, d, d)``; scalar rows become ``d = 1``."""
    z = np.asarray(z, dtype=float)
    if z.ndim >= 3 and z.shape[-1] == z.shape[-2] and (N is None or z.shape[-3] == N):
        return z
    return z[..., None, None]


def _logs_d1(z):
    z = as_bottom_row(z)
    if z.shape[-1] != 1:
        raise DomainError("quadrature evaluator is implemented for d = 1")
    if np.any(z[..., 0, 0] <= 0):
        raise DomainError("bottom row must be positive")
    return np.log(z[..., 0, 0])


def _width(lz_lo, lz_hi):
    # curvature of a e^{-u} + b e^{u} at its minimum is 2 sqrt(ab)
    with np.errstate(over="ignore"):
        return np.clip(1.0 / np.sqrt(2.0 * np.exp(0.5 * (lz_hi - lz_lo))), 1e-12, 1.5)


def _log_psi_d1(lam, lz, rtol):
    N = lz.shape[-1]
    if N == 1:
        return -lam[0] * lz[..., 0]
    b = lam[N - 1]
    D = N - 1
    batch = lz.shape[:-1]
    lzx = lz.reshape(batch + (1,) * D + (N,))

    def log_f(*us):
        u = np.stack(np.broadcast_arrays(*us), axis=-1)
        lzb = np.broadcast_to(lzx, u.shape[:-1] + (N,))
        val = -b * lzb.sum(axis=-1) + b * u.sum(axis=-1)
        val = val - np.exp(lzb[..., 1:] - u).sum(axis=-1) - np.exp(u - lzb[..., :-1]).sum(axis=-1)
        return val + _log_psi_d1(lam[:-1], u, rtol)

    centers = [0.5 * (lz[..., j] + lz[..., j + 1]) for j in range(D)]
    scales = [_width(lz[..., j], lz[..., j + 1]) for j in range(D)]

    def fix(arr, k):
        # constant per batch, broadcast against the k outer node axes
        return lambda *prefix: arr.reshape(batch + (1,) * k)

    return nested_de_log_integral(log_f, [fix(c, k) for k, c in enumerate(centers)],
                                  [fix(s, k) for k, s in enumerate(scales)], rtol=rtol)


def log_psi_quadrature(lam, z, rtol=1e-11, chunk=256):
    """``log psi^N_lam(z)`` for ``d = 1`` by nested quadrature; ``lam`` may be complex."""
    lam = np.asarray(lam)
    lz = _logs_d1(as_bottom_row(z, lam.size))
    if lz.shape[-1] != lam.size:
        raise ValueError("lambda and z must have the same length")
    if lam.size > 4:
        raise DomainError("quadrature evaluator supports N <= 4")
    batch = lz.shape[:-1]
    flat = lz.reshape(-1, lz.shape[-1])
    if flat.shape[0] <= chunk:
        return _log_psi_d1(lam, lz, rtol)
    # bounded memory: nodes of all nesting levels are held at once
    parts = [_log_psi_d1(lam, flat[i:i + chunk], rtol) for i in range(0, flat.shape[0], chunk)]
    return np.concatenate(parts).reshape(batch)


# --- importance sampling --------------------------------------------------

def _propose_entry(left, right, d, s_min, rng):
    """Draw ``x = T_c(W)``, ``W`` inverse Wishart(s), for an entry whose energy
    contains ``tr[right x^{-1}] + tr[x left^{-1}]``.

    ``c = tau * right`` with ``tau <= 1`` so the proposal never has a lighter
    tail at zero than the target.
    """
    zl = np.exp(logdet(left) / d)
    zr = np.exp(logdet(right) / d)
    rho = np.sqrt(zr / zl)
    s = np.maximum(s_min, rho)
    tau = np.minimum(1.0, s / rho)
    c = tau[..., None, None] * right
    w = np.empty(right.shape)
    flat_s = np.broadcast_to(s, right.shape[:-2]).ravel()
    wf = w.reshape(-1, d, d)
    # shapes differ per sample; draw through the Bartlett sampler with a common
    # shape when possible
    uniq = np.unique(flat_s)
    if uniq.size == 1:
        wf[...] = sample_inverse_wishart(WishartParams(float(uniq[0]), d), rng, size=flat_s.size)
    else:
        for val in uniq:
            sel = flat_s == val
            wf[sel] = sample_inverse_wishart(WishartParams(float(val), d), rng, size=int(sel.sum()))
    x = sym_mult(c, w)
    logq = inverse_wishart_logpdf(x, s, scale=c)
    return x, logq


def _sample_inner_rows(z, lam, n, rng):
    """Draw ``n`` arrays with bottom row ``z`` (shape ``(N, d, d)``) and their proposal log densities."""
    N, d = z.shape[-3], z.shape[-1]
    lam = np.asarray(lam, dtype=float)
    s_min = (d + 1) / 2 + 1.0 + float(np.ptp(lam)) if N > 1 else 1.0
    rows = [None] * N
    rows[N - 1] = np.broadcast_to(z, (n,) + z.shape).copy()
    logq = np.zeros(n)
    for i in range(N - 2, -1, -1):
        below = rows[i + 1]
        # entry j of row i sits between below[j] (x b^{-1} term) and below[j+1] (b x^{-1} term)
        x, lq = _propose_entry(below[:, :-1], below[:, 1:], d, s_min, rng)
        rows[i] = x
        logq = logq + lq.sum(axis=-1)
    return TriangularArray(rows), logq


def log_psi_mc(lam, z, n_samples=100_000, rng=None):
    """Importance-sampling estimate of ``psi^N_lam(z)`` for one bottom row ``z``.

    Returns an :class:`~mwhittaker.mc.Estimate`; ``lam`` must be real.
    """
    if np.iscomplexobj(lam):
        raise DomainError("the Monte Carlo evaluator needs real lambda")
    if rng is None:
        raise ValueError("rng required")
    z = as_bottom_row(z)
    lam = np.asarray(lam, dtype=float)
    if z.ndim != 3:
        raise ValueError("log_psi_mc evaluates one bottom row at a time")
    if z.shape[0] == 1:
        v = float(-lam[0] * logdet(z[0]))
        return Estimate(v, 0.0, float(n_samples), n_samples)
    x, logq = _sample_inner_rows(z, lam, n_samples, rng)
    log_w = log_delta(lam, x) - energy(x) - logq
    return estimate_from_log_weights(log_w)


# --- Feynman-Kac ---------------------------------------------------------

def lyapunov_exponents(lam, d):
    """Top and bottom Lyapunov exponents of inverse Wishart(lam_i) walks.

    Returns an ``(N, 2)`` array with rows ``(-digamma(lam_i - (d-1)/2), -digamma(lam_i))``.
    """
    lam = np.asarray(lam, dtype=float)
    return np.stack([-digamma(lam - (d - 1) / 2), -digamma(lam)], axis=-1)


def _check_fk(lam, d):
    lam = np.asarray(lam, dtype=float)
    gaps = np.concatenate([[lam[0]], np.diff(lam)])
    if np.any(gaps <= (d - 1) / 2):
        raise DomainError("Feynman-Kac needs lam_1 and successive gaps above (d-1)/2")
    return lam


def fk_truncation(lam, d, tail_tol=1e-12):
    """Number of steps after which the potential terms are below ``tail_tol`` on the exponential scale.

    ``ceil(log(tail_tol) / rate) + 10`` where ``rate < 0`` is the largest
    growth rate of ``tr[Y_{i+1}(n+1) Y_i(n)^{-1}]``.
    """
    lam = _check_fk(lam, d)
    if lam.size == 1:
        return 0
    ly = lyapunov_exponents(lam, d)
    rate = np.max(ly[1:, 0] - ly[:-1, 1])
    return int(math.ceil(math.log(tail_tol) / rate)) + 10


def _dufresne_sum(lam, y, n_paths, n_steps, rng):
    """Per-path sums ``sum_{n < n_steps} V(Y(n); Y(n+1))`` for independent walks."""
    d = y.shape[-1]
    N = y.shape[-3]
    cur = np.broadcast_to(y, (n_paths,) + y.shape).copy()
    total = np.zeros(n_paths)
    params = [WishartParams(float(l), d) for l in lam]
    for _ in range(n_steps):
        nxt = np.empty_like(cur)
        for i in range(N):
            nxt[:, i] = sym_mult(cur[:, i], sample_inverse_wishart(params[i], rng, size=n_paths))
        if d == 1:
            total += (nxt[:, 1:, 0, 0] / cur[:, :-1, 0, 0]).sum(axis=-1)
            cur = nxt
        else:
            total += np.trace(np.linalg.solve(cur[:, :-1], nxt[:, 1:]), axis1=-2, axis2=-1).sum(axis=-1)
            # the summands are invariant under a common congruence and the innovations are
            # orthogonally invariant, so renormalising Y_1 to I keeps the law and the conditioning
            g = invsqrtm(nxt[:, 0])[:, None]
            cur = g @ nxt @ g
            cur = 0.5 * (cur + np.swapaxes(cur, -1, -2))
    return total


def fk_expectation(lam, y, n_paths=100_000, rng=None, tail_tol=1e-12, n_steps=None):
    """Monte Carlo estimate of ``E_y[exp(-sum_n V(Y(n); Y(n+1)))]``."""
    if rng is None:
        raise ValueError("rng required")
    y = as_bottom_row(y)
    lam = _check_fk(lam, y.shape[-1])
    if n_steps is None:
        n_steps = fk_truncation(lam, y.shape[-1], tail_tol)
    total = _dufresne_sum(lam, y, n_paths, n_steps, rng)
    return estimate_from_log_weights(-total)


def log_psi_fk(lam, y, n_paths=100_000, rng=None, tail_tol=1e-12):
    """Feynman-Kac estimate of ``psi^N_lam(y)`` (an :class:`Estimate`)."""
    y = as_bottom_row(y)
    d = y.shape[-1]
    lam = _check_fk(lam, d)
    est = fk_expectation(lam, y, n_paths, rng, tail_tol)
    pref = sum(log_mvgamma(lam[j] - lam[i], d) for i in range(lam.size) for j in range(i + 1, lam.size))
    pref -= float(np.sum(lam * logdet(y)))
    return Estimate(est.log_value + pref, est.rel_se, est.ess, est.n)


# --- trapezoid functions and the Whittaker measure -----------------------

def log_psi_trapezoid(lam, s, z, rtol=1e-10):
    """``log psi^{N,n}_{lam;s}(z)`` with ``n = len(lam) >= N = len(z)``, for ``d = 1`` by quadrature.

    Uses ``psi^{N,N} = e^{-tr[s z_N^{-1}]} psi^N`` and one reversed ``P``
    integral for every extra parameter.
    """
    lam = np.asarray(lam)
    lz = _logs_d1(z)
    N = lz.shape[-1]
    n = lam.size
    if n < N:
        raise ValueError("need len(lam) >= len(z)")
    ls = float(np.log(np.asarray(s, dtype=float).reshape(-1)[0]))
    return _log_trap_d1(lam, ls, lz, rtol)


def _log_trap_d1(lam, ls, lz, rtol):
    N = lz.shape[-1]
    n = lam.size
    if n == N:
        return -np.exp(ls - lz[..., -1]) + _log_psi_d1(lam, lz, rtol)
    a = lam[-1]
    batch = lz.shape[:-1]
    lzx = lz.reshape(batch + (1,) * N + (N,))

    def log_f(*vs):
        v = np.stack(np.broadcast_arrays(*vs), axis=-1)
        lzb = np.broadcast_to(lzx, v.shape[:-1] + (N,))
        # P^N_a(zt; z) as a function of zt = e^v
        val = a * (v - lzb).sum(axis=-1) - np.exp(v - lzb).sum(axis=-1)
        if N > 1:
            val = val - np.exp(lzb[..., 1:] - v[..., :-1]).sum(axis=-1)
        return val + _log_trap_d1(lam[:-1], ls, v, rtol)

    def fix(arr, k):
        return lambda *prefix: arr.reshape(batch + (1,) * k)

    centers = [fix(lz[..., j], j) for j in range(N)]
    scales = [fix(np.ones(batch), j) for j in range(N)]
    return nested_de_log_integral(log_f, centers, scales, rtol=rtol)


def log_whittaker_measure(lam, rho, z, rtol=1e-10):
    """Log density (w.r.t. ``mu^N``) of the Whittaker measure with parameters ``lam`` (length n) and ``rho`` (length N).

    ``psi^{N,n}_{lam;I}(z) psi^N_rho(z) / prod_{l,i} G(lam_l + rho_i)``; ``d = 1``.
    """
    lam = np.asarray(lam, dtype=float)
    rho = np.asarray(rho, dtype=float)
    norm = sum(log_mvgamma(l + r, 1) for l in lam for r in rho)
    return log_psi_trapezoid(lam, 1.0, z, rtol) + log_psi_quadrature(rho, z, rtol) - norm


# --- evaluator object -----------------------------------------------------

@dataclass
class WhittakerEvaluator:
    """Callable ``(lam, z) -> log psi_lam(z)`` with a chosen method.

    ``method`` is ``"quadrature"``, ``"mc"``, ``"fk"`` or ``"auto"`` (quadrature
    for ``d = 1`` and ``N <= 3``, importance sampling otherwise).
    """

    method: str = "auto"
    rtol: float = 1e-10
    n_samples: int = 50_000
    rng: RngStream | None = None
    last_estimates: list = field(default_factory=list, repr=False)

    def _pick(self, N, d):
        if self.method != "auto":
            return self.method
        return "quadrature" if d == 1 and N <= 3 else "mc"

    def __call__(self, lam, z):
        lam = np.asarray(lam)
        z = as_bottom_row(z, lam.size)
        method = self._pick(z.shape[-3], z.shape[-1])
        if method == "quadrature":
            return log_psi_quadrature(lam, z, self.rtol)
        fn = log_psi_mc if method == "mc" else log_psi_fk
        flat = z.reshape((-1,) + z.shape[-3:])
        out = np.empty(flat.shape[0])
        self.last_estimates = []
        for i, row in enumerate(flat):
            est = fn(lam, row, self.n_samples, self.rng)
            self.last_estimates.append(est)
            out[i] = est.log_value
        return out.reshape(z.shape[:-3])


# --- asymptotics ----------------------------------------------------------

def r_array(N, k, d=1):
    """Bottom row ``r^N(k)`` with entries ``k^{2j-N-1} I``."""
    return np.array([k ** (2 * j - N - 1) * np.eye(d) for j in range(1, N + 1)])


def log_psi_at_r(lam, k, rtol=1e-12):
    """``log psi_lam(r^N(k))`` for ``d = 1``."""
    lam = np.asarray(lam)
    return float(np.real(log_psi_quadrature(lam, r_array(lam.size, k), rtol)))


def log_asymptotic_rhs(N, k, d=1):
    """Leading-order log asymptotics of ``psi(r^N(k))``.

    ``(2 pi / k)^{N(N-1) d(d+1)/8} |H(m)|^{-1/2} e^{-k Phi(m)}`` with ``m`` the
    minimiser of the triangular energy with identity bottom row.
    """
    from .energy import laplace_log_rhs, minimize_Phi, triangular_graph

    g = triangular_graph(N, [np.eye(d) if d > 1 else 1.0] * N)
    res = minimize_Phi(g)
    return laplace_log_rhs(res, k)
