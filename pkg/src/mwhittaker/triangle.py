"""Triangular arrays of positive definite matrices.

Row ``i`` (1-based) holds ``i`` matrices.  Rows are stored as arrays of shape
``batch + (i, d, d)`` so that a whole ensemble of arrays can be updated at
once.  For ``d == 1`` a flat layout ``batch + (N(N+1)/2,)`` is used by the
compiled kernels; entry ``(i, j)`` sits at ``i(i-1)/2 + j - 1``.
"""

from __future__ import annotations

import numpy as np

from .spd import as_spd, logdet

__all__ = ["TriangularArray", "flat_index", "log_delta", "energy"]


def flat_index(i, j):
    """Offset of entry ``(i, j)`` (1-based) in the flat layout."""
    return i * (i - 1) // 2 + j - 1


class TriangularArray:
    """Stack of rows ``x^1, ..., x^N`` with ``x^i`` in ``P_d^i``."""

    def __init__(self, rows, validate=False):
        rows = [np.asarray(r, dtype=float) for r in rows]
        if not rows:
            raise ValueError("empty triangular array")
        for i, r in enumerate(rows, start=1):
            if r.ndim < 3 or r.shape[-3] != i or r.shape[-1] != r.shape[-2]:
                raise ValueError(f"row {i} has shape {r.shape}, expected (..., {i}, d, d)")
        if validate:
            rows = [as_spd(r) for r in rows]
        self.rows = rows

    @property
    def N(self):
        return len(self.rows)

    @property
    def d(self):
        return self.rows[0].shape[-1]

    @property
    def batch_shape(self):
        return self.rows[0].shape[:-3]

    @property
    def bottom(self):
        return self.rows[-1]

    def row(self, i):
        return self.rows[i - 1]

    def entry(self, i, j):
        return self.rows[i - 1][..., j - 1, :, :]

    def inner(self):
        """Rows ``1..N-1`` as a new array."""
        return TriangularArray(self.rows[:-1])

    def copy(self):
        return TriangularArray([r.copy() for r in self.rows])

    def __getitem__(self, idx):
        return TriangularArray([r[idx] for r in self.rows])

    @classmethod
    def constant(cls, N, d, value=None, batch_shape=()):
        """Array with every entry equal to ``value`` (identity by default)."""
        v = np.eye(d) if value is None else np.asarray(value, dtype=float)
        return cls([np.broadcast_to(v, tuple(batch_shape) + (i, d, d)).copy() for i in range(1, N + 1)])

    @classmethod
    def from_inner_and_bottom(cls, inner, bottom):
        rows = [] if inner is None else list(inner.rows)
        return cls(rows + [np.asarray(bottom, dtype=float)])

    def to_flat(self):
        """Flat scalar layout; only for ``d == 1``."""
        if self.d != 1:
            raise ValueError("flat layout is defined for d = 1 only")
        return np.concatenate([r[..., 0, 0] for r in self.rows], axis=-1)

    @classmethod
    def from_flat(cls, flat, N=None):
        flat = np.asarray(flat, dtype=float)
        m = flat.shape[-1]
        if N is None:
            N = int(round((np.sqrt(8 * m + 1) - 1) / 2))
        rows = []
        for i in range(1, N + 1):
            k = flat_index(i, 1)
            rows.append(flat[..., k:k + i, None, None])
        return cls(rows)

    def __repr__(self):
        return f"TriangularArray(N={self.N}, d={self.d}, batch_shape={self.batch_shape})"


def _row_logdet(row):
    return logdet(row).sum(axis=-1)


def log_delta(lam, x):
    """``log Delta_lam(x)``: minus ``lam_i`` times the log-ratio of successive row determinants."""
    lam = np.asarray(lam)
    if lam.shape[-1] != x.N:
        raise ValueError("lambda must have one entry per row")
    out = 0.0
    prev = 0.0
    for i, r in enumerate(x.rows):
        cur = _row_logdet(r)
        out = out - lam[..., i] * (cur - prev)
        prev = cur
    return out


def _tr_ab_inv(a, b):
    # tr[a b^{-1}] over batches
    if a.shape[-1] == 1:
        return a[..., 0, 0] / b[..., 0, 0]
    return np.trace(np.linalg.solve(b, a), axis1=-2, axis2=-1)


def energy(x):
    """``Phi(x)``: sum over the arrows of the triangle of ``tr[a b^{-1}]``."""
    out = 0.0
    for i in range(x.N - 1):
        up, down = x.rows[i], x.rows[i + 1]
        out = out + _tr_ab_inv(down[..., 1:, :, :], up).sum(axis=-1)
        out = out + _tr_ab_inv(up, down[..., :-1, :, :]).sum(axis=-1)
    return out
