"""Random streams and Wishart-type samplers.

Streams are counter based (Philox) and keyed by ``(master_seed, stream_id)``,
so any experiment can be reproduced from its two integers regardless of how
many other streams were consumed before it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spd import DomainError, as_sym, inv, log_mvgamma, logdet

__all__ = [
    "RngStream",
    "WishartParams",
    "sample_wishart",
    "sample_inverse_wishart",
    "wishart_logpdf",
    "inverse_wishart_logpdf",
]

_MASK64 = (1 << 64) - 1


class RngStream:
    """Counter-based random stream.

    Parameters
    ----------
    master_seed : int
        Experiment-level seed.
    stream_id : int
        Identifier of the sub-stream; streams with different ids are
        statistically independent.
    """

    def __init__(self, master_seed, stream_id=0):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = self.master_seed | (self.stream_id << 64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, index):
        """Child stream derived deterministically from this stream and ``index``."""
        child = np.random.SeedSequence([self.stream_id, int(index)]).generate_state(1, np.uint64)[0]
        return RngStream(self.master_seed, int(child))

    def __repr__(self):
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id})"

    # thin delegation so samplers accept either a stream or a Generator
    def __getattr__(self, name):
        return getattr(self.generator, name)


def _gen(rng):
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError("rng must be an RngStream or numpy Generator")


@dataclass(frozen=True)
class WishartParams:
    """Shape ``alpha`` and dimension ``d``; requires ``alpha > (d-1)/2``."""

    alpha: float
    d: int

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("d must be >= 1")
        if not self.alpha > (self.d - 1) / 2:
            raise DomainError(f"Wishart shape must exceed {(self.d - 1) / 2}, got {self.alpha}")


def _size_tuple(size):
    if size is None:
        return ()
    return (size,) if np.isscalar(size) else tuple(size)


def sample_wishart(p, rng, size=None):
    """Draw from the Wishart law ``|x|^a e^{-tr x} mu(dx) / G_d(a)``.

    Bartlett construction: ``A`` lower triangular with ``A_ii^2`` gamma with
    shape ``(2a - i + 1)/2`` and scale 2, standard normals below the diagonal,
    and ``X = A A^T / 2``.
    """
    g = _gen(rng)
    shape = _size_tuple(size)
    d = p.d
    if d == 1:
        return g.gamma(p.alpha, 1.0, size=shape + (1, 1))
    a = np.zeros(shape + (d, d))
    k = np.arange(d)
    a[..., k, k] = np.sqrt(g.gamma((2 * p.alpha - k) / 2, 2.0, size=shape + (d,)))
    il = np.tril_indices(d, -1)
    a[..., il[0], il[1]] = g.standard_normal(shape + (len(il[0]),))
    return as_sym(0.5 * a @ np.swapaxes(a, -1, -2))


def sample_inverse_wishart(p, rng, size=None):
    """Draw ``X^{-1}`` with ``X`` Wishart(``p``); density ``|x|^{-a} e^{-tr x^{-1}} / G_d(a)`` w.r.t. mu."""
    return inv(sample_wishart(p, rng, size))


def wishart_logpdf(x, alpha, scale=None):
    """Log density w.r.t. mu of ``T_scale(W)``, ``W`` Wishart(alpha).

    ``scale=None`` means the identity.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if scale is None:
        return alpha * logdet(x) - np.trace(x, axis1=-2, axis2=-1) - log_mvgamma(alpha, d)
    s_inv = inv(scale)
    return (
        alpha * (logdet(x) - logdet(scale))
        - np.trace(s_inv @ x, axis1=-2, axis2=-1)
        - log_mvgamma(alpha, d)
    )


def inverse_wishart_logpdf(x, alpha, scale=None):
    """Log density w.r.t. mu of ``T_scale(W)``, ``W`` inverse Wishart(alpha)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if scale is None:
        return -alpha * logdet(x) - np.trace(inv(x), axis1=-2, axis2=-1) - log_mvgamma(alpha, d)
    return (
        -alpha * (logdet(x) - logdet(scale))
        - np.trace(scale @ inv(x), axis1=-2, axis2=-1)
        - log_mvgamma(alpha, d)
    )

