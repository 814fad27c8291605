"""Linear algebra on symmetric and positive definite matrices.

Matrices are plain ``numpy`` arrays of shape ``(..., d, d)``; every routine
broadcasts over leading batch axes.  The validated constructors
:func:`as_spd`, :func:`as_psd` and :func:`as_sym` symmetrise their input and
raise :class:`NotPositiveDefiniteError` when the spectrum is out of range.

The case ``d == 1`` takes scalar fast paths throughout, since the bulk of the
simulation work happens there.
"""

from __future__ import annotations

import numpy as np
from scipy.special import digamma, gammaln

__all__ = [
    "NotPositiveDefiniteError",
    "DomainError",
    "as_sym",
    "as_spd",
    "as_psd",
    "is_spd",
    "sqrtm",
    "invsqrtm",
    "inv",
    "logdet",
    "sym_mult",
    "expm_sym",
    "logm_sym",
    "log_mvgamma",
    "mvdigamma",
    "upper_triangle",
    "from_upper_triangle",
    "random_spd",
]

DEFAULT_REL_TOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix fails the positive definiteness check.

    Attributes
    ----------
    eigenvalue : float
        The offending (smallest) eigenvalue.
    """

    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = float(eigenvalue)
        super().__init__(message or f"matrix not positive definite (min eigenvalue {self.eigenvalue:.3e})")


class DomainError(ValueError):
    """Raised when a parameter lies outside the domain of a function."""


def _check_square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"expected (..., d, d) array, got shape {a.shape}")
    return a


def as_sym(a):
    """Return the symmetric part of ``a``."""
    a = _check_square(a)
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _spectrum_check(a, rel_tol, strict):
    if a.size == 0:
        return
    w = np.linalg.eigvalsh(a)
    scale = np.maximum(np.abs(w).max(axis=-1), 1.0)
    lo = w.min(axis=-1)
    bad = lo <= rel_tol * scale if strict else lo < -rel_tol * scale
    if np.any(bad):
        raise NotPositiveDefiniteError(np.min(lo))


def as_spd(a, rel_tol=DEFAULT_REL_TOL):
    """Symmetrise ``a`` and check that every eigenvalue exceeds ``rel_tol`` times the spectral scale."""
    a = as_sym(a)
    _spectrum_check(a, rel_tol, strict=True)
    return a


def as_psd(a, rel_tol=DEFAULT_REL_TOL):
    """Symmetrise ``a`` and check that no eigenvalue is below ``-rel_tol`` times the spectral scale."""
    a = as_sym(a)
    _spectrum_check(a, rel_tol, strict=False)
    return a


def is_spd(a, rel_tol=0.0):
    """Boolean mask over the batch: True where ``a`` is positive definite."""
    a = _check_square(a)
    if a.shape[-1] == 1:
        return a[..., 0, 0] > rel_tol * np.maximum(np.abs(a[..., 0, 0]), 1.0)
    w = np.linalg.eigvalsh(as_sym(a))
    return w.min(axis=-1) > rel_tol * np.maximum(np.abs(w).max(axis=-1), 1.0)


def _eig_apply(a, fn):
    w, v = np.linalg.eigh(a)
    return (v * fn(w)[..., None, :]) @ np.swapaxes(v, -1, -2)


def sqrtm(a):
    """Principal square root of a positive semi-definite matrix.

    Tiny negative eigenvalues from rounding are clipped to zero.
    """
    a = _check_square(a)
    if a.shape[-1] == 1:
        return np.sqrt(np.maximum(a, 0.0))
    if a.shape[-1] == 2:
        # sqrt(A) = (A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A))
        det = np.maximum(a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0], 0.0)
        sd = np.sqrt(det)
        t = np.sqrt(np.maximum(a[..., 0, 0] + a[..., 1, 1] + 2 * sd, 0.0))
        out = a + sd[..., None, None] * np.eye(2)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(t[..., None, None] > 0, out / t[..., None, None], 0.0)
        return 0.5 * (out + np.swapaxes(out, -1, -2))
    return _eig_apply(a, lambda w: np.sqrt(np.maximum(w, 0.0)))


def invsqrtm(a):
    """Inverse principal square root of a positive definite matrix."""
    a = _check_square(a)
    if a.shape[-1] == 1:
        return 1.0 / np.sqrt(a)
    return _eig_apply(a, lambda w: 1.0 / np.sqrt(w))


def inv(a):
    """Inverse of a symmetric matrix, symmetrised to remove rounding asymmetry."""
    a = _check_square(a)
    if a.shape[-1] == 1:
        return 1.0 / a
    return as_sym(np.linalg.inv(a))


def logdet(a):
    """Log-determinant of a positive definite matrix.

    Returns ``-inf``-free values only for positive definite input; for
    indefinite input the result is ``nan``.
    """
    a = _check_square(a)
    if a.shape[-1] == 1:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(a[..., 0, 0] > 0, np.log(np.abs(a[..., 0, 0])), np.nan)
    sign, ld = np.linalg.slogdet(a)
    return np.where(sign > 0, ld, np.nan)


def sym_mult(y, x):
    """Symmetrised product ``y^{1/2} x y^{1/2}``.

    ``y`` may be positive semi-definite (the zero matrix gives zero).
    """
    y = _check_square(y)
    x = _check_square(x)
    if y.shape[-1] == 1:
        return y * x
    r = sqrtm(y)
    return as_sym(r @ x @ r)


def expm_sym(s):
    """Matrix exponential of a symmetric matrix."""
    s = _check_square(s)
    if s.shape[-1] == 1:
        return np.exp(s)
    return _eig_apply(as_sym(s), np.exp)


def logm_sym(a):
    """Matrix logarithm of a positive definite matrix."""
    a = _check_square(a)
    if a.shape[-1] == 1:
        return np.log(a)
    return _eig_apply(as_sym(a), np.log)


def log_mvgamma(alpha, d):
    """Log of the multivariate gamma function.

    ``log G_d(alpha) = d(d-1)/4 log(pi) + sum_{k=1}^d log G(alpha - (k-1)/2)``,
    defined for ``Re(alpha) > (d-1)/2``.  Complex ``alpha`` is accepted and
    the principal branch of ``log G`` is used.
    """
    if d < 1:
        raise DomainError("d must be >= 1")
    alpha = np.asarray(alpha)
    if np.any(np.real(alpha) <= (d - 1) / 2):
        raise DomainError(f"log_mvgamma needs Re(alpha) > {(d - 1) / 2}")
    out = d * (d - 1) / 4 * np.log(np.pi)
    if np.iscomplexobj(alpha):
        from scipy.special import loggamma

        return out + sum(loggamma(alpha - k / 2) for k in range(d))
    return out + sum(gammaln(alpha - k / 2) for k in range(d))


def mvdigamma(alpha, d):
    """Derivative of :func:`log_mvgamma` with respect to ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= (d - 1) / 2):
        raise DomainError(f"mvdigamma needs alpha > {(d - 1) / 2}")
    return sum(digamma(alpha - k / 2) for k in range(d))


def upper_triangle(a):
    """Row-major upper-triangle entries of ``a`` as shape ``(..., d(d+1)/2)``."""
    a = _check_square(a)
    i, j = np.triu_indices(a.shape[-1])
    return a[..., i, j]


def from_upper_triangle(v, d=None):
    """Inverse of :func:`upper_triangle`."""
    v = np.asarray(v, dtype=float)
    m = v.shape[-1]
    if d is None:
        d = int(round((np.sqrt(8 * m + 1) - 1) / 2))
    if d * (d + 1) // 2 != m:
        raise ValueError(f"{m} entries do not fill the upper triangle of a {d}x{d} matrix")
    out = np.zeros(v.shape[:-1] + (d, d))
    i, j = np.triu_indices(d)
    out[..., i, j] = v
    out[..., j, i] = v
    return out


def random_spd(d, rng, size=(), scale=1.0):
    """Random positive definite matrices ``exp(S)`` with ``S`` a scaled symmetric Gaussian.

    Intended for tests and random instances, not as a distribution of interest.
    """
    size = (size,) if np.isscalar(size) else tuple(size)
    g = rng.standard_normal(size + (d, d))
    return expm_sym(scale * as_sym(g))
