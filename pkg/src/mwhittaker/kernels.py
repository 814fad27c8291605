"""Log densities and samplers for the kernels on vectors of positive definite matrices.

A vector in ``P_d^N`` is an array of shape ``(..., N, d, d)``.  All densities
are with respect to products of the invariant measure ``mu``.  Parameters may
be complex, in which case the log density is complex too.

Conventions shared by the ``Q`` kernel and the triangular dynamics: the
inverse of the (absent) entry ``y_0`` is zero and the (absent) entry
``ytilde_N`` is the zero matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .rand import WishartParams, sample_inverse_wishart
from .spd import DomainError, inv, is_spd, log_mvgamma, logdet, sym_mult
from .triangle import TriangularArray, energy, log_delta

__all__ = [
    "log_K",
    "log_P",
    "log_P_reverse",
    "log_Q",
    "log_Lambda",
    "log_Pi",
    "log_Sigma",
    "log_P_doob",
    "RelationSides",
    "relation_sides",
    "sample_P1",
    "sample_Q",
    "sample_Pi",
    "q_update",
    "log_P1_norm",
    "log_Q_norm",
    "log_Pi_norm",
    "DoobKernel",
]

_NEG_INF = -np.inf


def _tr(a, b_inv_of):
    """``tr[a b^{-1}]`` with ``b`` given (not its inverse)."""
    if a.shape[-1] == 1:
        return a[..., 0, 0] / b_inv_of[..., 0, 0]
    return np.trace(np.linalg.solve(b_inv_of, a), axis1=-2, axis2=-1)


def _check_len(x, n, name):
    if x.shape[-3] != n:
        raise ValueError(f"{name} must have {n} entries, got {x.shape[-3]}")


def log_K(b, z, y):
    """Kernel from ``P_d^N`` to ``P_d^{N-1}``.

    ``prod_i |z_i|^{-b} prod_j |y_j|^b exp(-tr[z_{j+1} y_j^{-1} + y_j z_j^{-1}])``.
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    N = z.shape[-3]
    _check_len(y, N - 1, "y")
    out = -b * logdet(z).sum(axis=-1)
    if N > 1:
        out = out + b * logdet(y).sum(axis=-1)
        out = out - _tr(z[..., 1:, :, :], y).sum(axis=-1) - _tr(y, z[..., :-1, :, :]).sum(axis=-1)
    return out


def log_P(a, z, zt):
    """``P^N_a(z; zt)`` as a density in ``zt``."""
    z = np.asarray(z, dtype=float)
    zt = np.asarray(zt, dtype=float)
    N = z.shape[-3]
    _check_len(zt, N, "zt")
    out = a * (logdet(z) - logdet(zt)).sum(axis=-1) - _tr(z, zt).sum(axis=-1)
    if N > 1:
        out = out - _tr(zt[..., 1:, :, :], z[..., :-1, :, :]).sum(axis=-1)
    return out


def log_P_reverse(a, z, zt):
    """Density of the reversed kernel: ``P^N_a(zt; z)`` viewed as a function of ``zt``."""
    return log_P(a, zt, z)


def log_Q(a, y, yt, z, zt):
    """``Q^N_a(y, yt, z; zt)``.

    ``y, yt`` lie in ``P_d^{N-1}`` and ``z, zt`` in ``P_d^N``.  Outside the
    support (``zt_j^{-1} - y_{j-1}^{-1}`` not positive definite) the value
    is ``-inf``.
    """
    z = np.asarray(z, dtype=float)
    zt = np.asarray(zt, dtype=float)
    N = z.shape[-3]
    d = z.shape[-1]
    y = np.asarray(y, dtype=float).reshape(z.shape[:-3] + (N - 1, d, d)) if N > 1 else None
    yt = np.asarray(yt, dtype=float).reshape(z.shape[:-3] + (N - 1, d, d)) if N > 1 else None
    _check_len(zt, N, "zt")
    zt_inv = inv(zt)
    c = z.copy()
    b = zt_inv.copy()
    if N > 1:
        c[..., :-1, :, :] = c[..., :-1, :, :] + yt
        b[..., 1:, :, :] = b[..., 1:, :, :] - inv(y)
    ok = is_spd(b).all(axis=-1)
    with np.errstate(invalid="ignore"):
        ld_b = np.where(ok[..., None], logdet(np.where(ok[..., None, None, None], b, np.eye(d))), 0.0)
    ld_c = logdet(c)
    tr_cb = np.trace(c @ b, axis1=-2, axis2=-1) if d > 1 else c[..., 0, 0] * b[..., 0, 0]
    out = (a * (ld_c + ld_b) - tr_cb).sum(axis=-1)
    if N > 1:
        # |I - zt_j y_{j-1}^{-1}| = |zt_j| |zt_j^{-1} - y_{j-1}^{-1}|
        ld_jac = logdet(zt[..., 1:, :, :]) + ld_b[..., 1:]
        out = out - (d + 1) / 2 * ld_jac.sum(axis=-1)
    return np.where(ok, out, _NEG_INF)


def log_Lambda(a, b, y, yt, z, zt):
    """``P^{N-1}_a(y; yt) Q^N_{a+b}(y, yt, z; zt)``."""
    return log_P(a, y, yt) + log_Q(a + b, y, yt, z, zt)


def log_Pi(lam, x, xt):
    """``Pi^N_lam(x; xt)``: ``P^1`` on the top row, then ``Q^i_{lam_i}`` row by row."""
    out = log_P(lam[0], x.rows[0], xt.rows[0])
    for i in range(1, x.N):
        out = out + log_Q(lam[i], x.rows[i - 1], xt.rows[i - 1], x.rows[i], xt.rows[i])
    return out


def log_Sigma(lam, x):
    """Density of the array ``x`` given its bottom row: ``Delta_lam(x) exp(-Phi(x))``."""
    return log_delta(lam, x) - energy(x)


def log_P_doob(a, lam, z, zt, log_psi):
    """Doob transform of ``P_a`` by the Whittaker function ``psi_lam``.

    ``log_psi(lam, z)`` evaluates ``log psi_lam`` on ``(..., N, d, d)`` input.
    """
    d = np.shape(z)[-1]
    lam = np.asarray(lam)
    norm = sum(log_mvgamma(a + lam[i], d) for i in range(lam.shape[-1]))
    return log_P(a, z, zt) + log_psi(lam, zt) - log_psi(lam, z) - norm


class RelationSides(NamedTuple):
    """Both sides of each of the two exact kernel relations, in log form."""

    k_via_p_lhs: np.ndarray
    k_via_p_rhs: np.ndarray
    k_via_lower_p_lhs: np.ndarray
    k_via_lower_p_rhs: np.ndarray


def relation_sides(a, z, y, s):
    """Evaluate the relations expressing ``K^N_a`` through ``P^N_a`` and ``P^{N-1}_a``.

    * ``K(z; y) = |s|^{-a} e^{tr[s z_N^{-1}]} P^N_a((y, s); z)``
    * ``K(z; y) = |z_N|^{-a} e^{-tr[z_N y_{N-1}^{-1}]} P^{N-1}_a(y; z_{1..N-1})``
    """
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.asarray(s, dtype=float)
    lk = log_K(a, z, y)
    ys = np.concatenate([y, s[..., None, :, :]], axis=-3)
    zn = z[..., -1, :, :]
    rhs1 = -a * logdet(s) + _tr(s, zn) + log_P(a, ys, z)
    if z.shape[-3] > 1:
        rhs2 = -a * logdet(zn) - _tr(zn, y[..., -1, :, :]) + log_P(a, y, z[..., :-1, :, :])
    else:
        rhs2 = -a * logdet(zn)
    return RelationSides(lk, rhs1, lk, rhs2)


# --- normalisations -------------------------------------------------------

def log_P1_norm(a, d):
    """``log int P^1_a(z; zt) mu(dzt) = log G_d(a)``."""
    return log_mvgamma(a, d)


def log_Q_norm(a, N, d):
    """``log int Q^N_a = N log G_d(a)``."""
    return N * log_mvgamma(a, d)


def log_Pi_norm(lam, d):
    """``log int Pi^N_lam = sum_i i log G_d(lam_i)``."""
    return sum((i + 1) * log_mvgamma(l, d) for i, l in enumerate(lam))


# --- samplers -------------------------------------------------------------

def q_update(y, yt, z, w):
    """Deterministic part of a ``Q`` draw.

    ``zt_j = [y_{j-1}^{-1} + T_{yt_j + z_j}(w_j)^{-1}]^{-1}`` with the
    boundary conventions of this module; ``w`` has the shape of ``z``.
    """
    z = np.asarray(z, dtype=float)
    N = z.shape[-3]
    c = z.copy()
    if N > 1:
        c[..., :-1, :, :] += yt
    t = sym_mult(c, w)
    if N == 1:
        return t
    out = np.empty_like(t)
    out[..., 0, :, :] = t[..., 0, :, :]
    out[..., 1:, :, :] = inv(inv(y) + inv(t[..., 1:, :, :]))
    return out


def sample_P1(a, z, rng):
    """Draw from ``P^1_a(z; .) / G_d(a)``: ``T_z(W)`` with ``W`` inverse Wishart(a)."""
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    w = sample_inverse_wishart(WishartParams(a, d), rng, size=z.shape[:-2])
    return sym_mult(z, w)


def sample_Q(a, y, yt, z, rng):
    """Draw from the normalised ``Q^N_a(y, yt, z; .)``."""
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    w = sample_inverse_wishart(WishartParams(a, d), rng, size=z.shape[:-2])
    return q_update(y, yt, z, w)


def sample_Pi(lam, x, rng):
    """Draw from the normalised kernel ``Pi^N_lam(x; .)`` on triangular arrays."""
    rows = []
    for i, r in enumerate(x.rows):
        d = r.shape[-1]
        w = sample_inverse_wishart(WishartParams(lam[i], d), rng, size=r.shape[:-2])
        if i == 0:
            rows.append(sym_mult(r, w))
        else:
            rows.append(q_update(x.rows[i - 1], rows[i - 1], r, w))
    return TriangularArray(rows)


@dataclass
class DoobKernel:
    """Transition kernel of the bottom row under the Doob transform.

    ``log_psi`` evaluates ``log psi_lam``; see :class:`mwhittaker.whittaker.WhittakerEvaluator`.
    """

    a: float
    lam: tuple
    log_psi: Callable

    def log_density(self, z, zt):
        return log_P_doob(self.a, np.asarray(self.lam), z, zt, self.log_psi)

    def check(self):
        d_min = min(np.real(self.a + l) for l in self.lam)
        if d_min <= 0:
            raise DomainError("a + lam_i must be positive")
