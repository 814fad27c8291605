"""Monte Carlo estimates carried in log space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

__all__ = ["Estimate", "estimate_from_log_weights", "find_mode", "student_t_is"]


@dataclass(frozen=True)
class Estimate:
    """Positive Monte Carlo estimate.

    ``log_value`` is the log of the estimate, ``rel_se`` the standard error
    divided by the estimate, ``ess`` Kish's effective sample size.
    """

    log_value: float
    rel_se: float
    ess: float
    n: int = 0

    @property
    def value(self):
        return float(np.exp(self.log_value))

    @property
    def se(self):
        return self.value * self.rel_se

    def within(self, reference, n_se=3.0):
        """True when ``reference`` lies within ``n_se`` standard errors."""
        return abs(self.value - reference) <= n_se * self.se

    def to_dict(self):
        return {"log_value": self.log_value, "rel_se": self.rel_se, "ess": self.ess, "n": self.n}


def estimate_from_log_weights(log_w):
    """Estimate of ``E[w]`` from i.i.d. log weights (``-inf`` allowed)."""
    log_w = np.asarray(log_w, dtype=float).ravel()
    n = log_w.size
    if n < 2:
        raise ValueError("need at least two weights")
    m = np.max(log_w)
    if not np.isfinite(m):
        return Estimate(-np.inf, np.inf, 0.0, n)
    w = np.exp(log_w - m)
    mean = w.mean()
    rel_se = w.std(ddof=1) / np.sqrt(n) / mean
    ess = w.sum() ** 2 / np.sum(w**2)
    return Estimate(float(m + np.log(mean)), float(rel_se), float(ess), n)


def find_mode(log_f, x0):
    """Maximiser of a smooth log density and the Hessian of ``-log_f`` there.

    The Hessian is taken by central differences.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    res = optimize.minimize(lambda x: -log_f(x), x0, method="Nelder-Mead" if x0.size == 1 else "BFGS",
                            options={"maxiter": 5000})
    x = res.x
    n = x.size
    h = 1e-4 * np.maximum(1.0, np.abs(x))
    hess = np.empty((n, n))
    f0 = -log_f(x)
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h[i]
            ej[j] = h[j]
            if i == j:
                v = (-log_f(x + ei) - 2 * f0 - log_f(x - ei)) / h[i] ** 2
            else:
                v = (-log_f(x + ei + ej) + log_f(x + ei - ej) + log_f(x - ei + ej) - log_f(x - ei - ej)) / (
                    4 * h[i] * h[j])
            hess[i, j] = hess[j, i] = v
    return x, hess


def student_t_is(log_f_batch, center, cov, n, rng, df=5.0, inflate=1.5):
    """Importance-sampling estimate of ``int exp(log_f) du`` over ``R^D``.

    The proposal is a multivariate Student t around ``center`` with scale
    matrix ``inflate * cov``; heavier than exponential tails keep the weight
    variance finite for the log-concave-like integrands used here.

    ``log_f_batch`` maps an ``(n, D)`` array to ``n`` log values.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    cov = np.atleast_2d(np.asarray(cov, dtype=float)) * inflate
    dist = stats.multivariate_t(loc=center, shape=cov, df=df)
    g = rng.generator if hasattr(rng, "generator") else rng
    u = dist.rvs(size=n, random_state=g).reshape(n, center.size)
    log_w = log_f_batch(u) - dist.logpdf(u)
    return estimate_from_log_weights(log_w)
