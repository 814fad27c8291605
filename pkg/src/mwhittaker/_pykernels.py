"""Pure numpy implementations of the scalar hot loops.

These implement the same algorithms as ``_ckernels.pyx``; the compiled module
is preferred when it is importable (see :mod:`mwhittaker._backend`).
All arrays are float64 and C contiguous.  Triangular arrays use the flat
layout of :mod:`mwhittaker.triangle`.
"""

import numpy as np


def tri_step_d1(x, w):
    """One step of the scalar triangular dynamic for a batch ``x`` of shape ``(B, M)``."""
    B, M = x.shape
    N = int(round((np.sqrt(8 * M + 1) - 1) / 2))
    new = np.empty_like(x)
    for i in range(1, N + 1):
        base = i * (i - 1) // 2
        pbase = (i - 1) * (i - 2) // 2
        for j in range(1, i + 1):
            k = base + j - 1
            c = x[:, k].copy()
            if j <= i - 1:
                c += new[:, pbase + j - 1]
            t = c * w[:, k]
            if j >= 2:
                new[:, k] = 1.0 / (1.0 / x[:, pbase + j - 2] + 1.0 / t)
            else:
                new[:, k] = t
    return new


def tri_run_d1(x0, ws):
    """Trajectory ``(T+1, B, M)`` from ``x0`` driven by innovations ``ws`` of shape ``(T, B, M)``."""
    T = ws.shape[0]
    out = np.empty((T + 1,) + x0.shape)
    out[0] = x0
    for n in range(T):
        out[n + 1] = tri_step_d1(out[n], ws[n])
    return out


def polymer_dp_d1(v):
    """Point-to-point partition functions of the log-gamma-type polymer.

    ``v`` has shape ``(B, n, N)`` with ``v[:, m-1, k-1]`` the weight of site
    ``(m, k)``.  Returns ``Z`` of shape ``(B, n+1, N)``: ``Z[:, m, k-1]`` is the
    sum over up/right paths from ``(1, 1)`` to ``(m, k)`` of the product of
    weights, with ``Z[:, 0] = (1, 0, ..., 0)``.
    """
    B, n, N = v.shape
    z = np.zeros((B, n + 1, N))
    z[:, 0, 0] = 1.0
    for m in range(1, n + 1):
        for k in range(N):
            c = z[:, m - 1, k].copy()
            if k > 0:
                c += z[:, m, k - 1]
            z[:, m, k] = c * v[:, m - 1, k]
    return z


def strict_weak_dp_d1(u):
    """Strict-weak polymer partition functions.

    ``u[:, m-1, k-1]`` weighs the horizontal edge ``(m-1, k) -> (m, k)``;
    diagonal edges ``(m-1, k-1) -> (m, k)`` weigh one.  Returns ``L`` of shape
    ``(B, n+1, N)`` with ``L[:, 0] = (1, 0, ..., 0)``.
    """
    B, n, N = u.shape
    out = np.zeros((B, n + 1, N))
    out[:, 0, 0] = 1.0
    for m in range(1, n + 1):
        for k in range(N):
            val = out[:, m - 1, k] * u[:, m - 1, k]
            if k > 0:
                val = out[:, m - 1, k - 1] + val
            out[:, m, k] = val
    return out


def _site_logp(uu, i, j, up, dn, lz, N, p):
    # local log target of inner entry (i, j) at log value uu; up/dn are flat log arrays
    # of the inner rows, lz the log bottom row
    def val(r, c):
        if r == N:
            return lz[:, c - 1]
        return up[:, r * (r - 1) // 2 + c - 1]

    x = np.exp(uu)
    out = p * uu - np.exp(val(i + 1, j + 1) - uu) - x * np.exp(-val(i + 1, j))
    if j >= 2:
        out = out - x * np.exp(-val(i - 1, j - 1))
    if j <= i - 1:
        out = out - np.exp(val(i - 1, j) - uu)
    return out


def sigma_sweeps_d1(u, lz, beta, sigma, normals, uniforms):
    """Random-walk Metropolis sweeps on the log inner entries of scalar arrays.

    Parameters
    ----------
    u : (B, F) log inner entries, updated in place (``F = N(N-1)/2``).
    lz : (B, N) log bottom row.
    beta : (N,) parameters of the target ``Delta_beta e^{-Phi}``.
    sigma : (B, F) proposal scales.
    normals, uniforms : (S, F, B) driving randomness for ``S`` sweeps.

    Returns
    -------
    (B, F) array of acceptance counts.
    """
    B, F = u.shape
    N = lz.shape[1]
    S = normals.shape[0]
    acc = np.zeros((B, F))
    for s in range(S):
        k = 0
        for i in range(1, N):
            p = beta[i] - beta[i - 1]
            for j in range(1, i + 1):
                old = u[:, k].copy()
                prop = old + sigma[:, k] * normals[s, k]
                lo = _site_logp(old, i, j, u, u, lz, N, p)
                ln = _site_logp(prop, i, j, u, u, lz, N, p)
                ok = np.log(uniforms[s, k]) < ln - lo
                u[:, k] = np.where(ok, prop, old)
                acc[:, k] += ok
                k += 1
    return acc
