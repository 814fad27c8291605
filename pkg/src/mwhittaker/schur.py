"""Schur polynomials by the interlacing recursion, with Pieri and Cauchy-Littlewood checks.

``s_lam(x_1..x_n) = sum_{mu < lam} s_mu(x_1..x_{n-1}) x_n^{|lam| - |mu|}`` where
``mu < lam`` means ``lam_{i+1} <= mu_i <= lam_i``.  Truncated infinite sums
come with certified tail bounds derived from monomial positivity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Partition",
    "partitions",
    "schur_poly",
    "complete_homogeneous",
    "geometric_tail_bound",
    "PieriResult",
    "pieri_check",
    "CauchyResult",
    "cauchy_littlewood_check",
]


class Partition(tuple):
    """Weakly decreasing tuple of positive integers (trailing zeros dropped)."""

    def __new__(cls, parts=()):
        parts = tuple(int(p) for p in parts)
        if any(p < 0 for p in parts) or any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError(f"not a partition: {parts}")
        while parts and parts[-1] == 0:
            parts = parts[:-1]
        return super().__new__(cls, parts)

    @property
    def size(self):
        return sum(self)

    @property
    def length(self):
        return len(self)


def partitions(n, max_part=None, max_len=None):
    """All partitions of ``n`` with bounded largest part and length."""
    max_part = n if max_part is None else max_part
    if n == 0:
        yield Partition()
        return
    if max_len == 0:
        return
    for first in range(min(n, max_part), 0, -1):
        for rest in partitions(n - first, first, None if max_len is None else max_len - 1):
            yield Partition((first,) + tuple(rest))


def _interlaced(lam, m):
    # partitions mu with lam_{i+1} <= mu_i <= lam_i and length <= m
    lam = tuple(lam) + (0,) * (m + 1 - len(lam))
    ranges = [range(lam[i + 1], lam[i] + 1) for i in range(m)]
    for mu in itertools.product(*ranges):
        yield Partition(mu)


def schur_poly(lam, x, memo=None):
    """``s_lam(x)`` by the branching recursion; ``memo`` may be shared between calls on the same ``x``."""
    lam = Partition(lam)
    x = tuple(x)
    memo = {} if memo is None else memo

    def rec(lam, n):
        if lam.length > n:
            return 0.0
        if n == 0:
            return 1.0
        key = (lam, n)
        if key not in memo:
            if n == 1:
                memo[key] = x[0] ** lam.size
            else:
                xn = x[n - 1]
                memo[key] = sum(rec(mu, n - 1) * xn ** (lam.size - mu.size) for mu in _interlaced(lam, n - 1))
        return memo[key]

    return rec(lam, len(x))


def complete_homogeneous(k, x):
    """``h_k(x)`` via ``h_k(x_1..x_n) = h_k(x_1..x_{n-1}) + x_n h_{k-1}(x_1..x_n)``."""
    h = np.zeros(k + 1)
    h[0] = 1.0
    for xi in x:
        for j in range(1, k + 1):
            h[j] += xi * h[j - 1]
    return h[k]


def geometric_tail_bound(t, M, n_grid=400):
    """Upper bound on ``sum_{k > M} h_k(t)`` for ``t >= 0`` with ``max t < 1``.

    Uses ``h_k(t) <= s^{k-M-1} h_k(t)`` for ``s >= 1`` so the tail is at most
    ``s^{-(M+1)} prod (1 - s t_i)^{-1}``; the bound is minimised over a grid
    of ``s`` in ``[1, 1/max t)``.
    """
    t = np.asarray(t, dtype=float).ravel()
    tmax = float(t.max()) if t.size else 0.0
    if tmax >= 1:
        raise ValueError("need max t < 1 for convergence")
    if tmax == 0:
        return 0.0
    s = 1.0 + (1.0 / tmax - 1.0) * np.linspace(0.0, 1.0, n_grid, endpoint=False)
    logb = -(M + 1) * np.log(s) - np.log1p(-np.outer(s, t)).sum(axis=1)
    return float(np.exp(logb.min()))


@dataclass
class PieriResult:
    lhs: float
    rhs: float
    tail_bound: float

    @property
    def ok(self):
        return abs(self.lhs - self.rhs) <= self.tail_bound + 1e-12 * max(1.0, abs(self.rhs))


def pieri_check(mu, x, max_growth=30):
    """Truncated ``sum_{lam > mu, lam_1 <= mu_1 + max_growth} s_lam(x)`` against ``prod(1 - x_i)^{-1} s_mu(x)``.

    ``lam > mu`` ranges over partitions with ``mu`` interlacing ``lam`` and at
    most ``len(x)`` parts.  Every omitted ``lam`` adds more than
    ``max_growth`` boxes, so the omitted mass is bounded by
    ``s_mu(|x|) sum_{k > max_growth} h_k(|x|)``.
    """
    mu = Partition(mu)
    x = [float(v) for v in x]
    n = len(x)
    if n and max(abs(v) for v in x) >= 1:
        raise ValueError("Pieri sum diverges unless max |x_i| < 1")
    if mu.length > n:
        return PieriResult(0.0, 0.0, 0.0)
    memo = {}
    m = tuple(mu) + (0,) * (n - mu.length)
    top = m[0] + max_growth if n else 0
    ranges = [range(m[0], top + 1)] + [range(m[i], m[i - 1] + 1) for i in range(1, n)]
    lhs = sum(schur_poly(lam, x, memo) for lam in itertools.product(*ranges))
    rhs = schur_poly(mu, x, memo) * float(np.prod([1.0 / (1.0 - v) for v in x]))
    ax = [abs(v) for v in x]
    tail = schur_poly(mu, ax) * geometric_tail_bound(ax, max_growth) if n else 0.0
    return PieriResult(float(lhs), rhs, tail)


@dataclass
class CauchyResult:
    lhs: float
    rhs: float
    tail_bound: float

    @property
    def ok(self):
        return abs(self.lhs - self.rhs) <= self.tail_bound + 1e-12 * max(1.0, abs(self.rhs))


def cauchy_littlewood_check(x, y, max_size=40):
    """``sum_{|lam| <= max_size} s_lam(x) s_lam(y)`` against ``prod (1 - x_l y_i)^{-1}``.

    The omitted terms form ``sum_{k > max_size} h_k(x_l y_i)``, bounded with
    :func:`geometric_tail_bound` on the absolute products.
    """
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    prods = np.abs(np.outer(x, y)).ravel()
    if prods.size and prods.max() >= 1:
        raise ValueError("Cauchy-Littlewood sum diverges unless |x_l y_i| < 1")
    L = min(len(x), len(y))
    mx, my = {}, {}
    lhs = 0.0
    for k in range(max_size + 1):
        for lam in partitions(k, max_len=L):
            lhs += schur_poly(lam, x, mx) * schur_poly(lam, y, my)
    rhs = float(np.prod([1.0 / (1.0 - a * b) for a in x for b in y]))
    return CauchyResult(lhs, rhs, geometric_tail_bound(prods, max_size))
