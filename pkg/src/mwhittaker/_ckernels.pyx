# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scalar hot loops; the reference implementation is ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt

cnp.import_array()


cdef inline int _n_rows(Py_ssize_t m):
    return <int>((sqrt(8.0 * m + 1.0) - 1.0) / 2.0 + 0.5)


cdef void _step(const double* x, const double* w, double* out, int N) noexcept nogil:
    cdef int i, j, k, base, pbase
    cdef double c, t
    for i in range(1, N + 1):
        base = i * (i - 1) // 2
        pbase = (i - 1) * (i - 2) // 2
        for j in range(1, i + 1):
            k = base + j - 1
            c = x[k]
            if j <= i - 1:
                c = c + out[pbase + j - 1]
            t = c * w[k]
            if j >= 2:
                out[k] = 1.0 / (1.0 / x[pbase + j - 2] + 1.0 / t)
            else:
                out[k] = t


def tri_step_d1(double[:, ::1] x, double[:, ::1] w):
    cdef Py_ssize_t B = x.shape[0], M = x.shape[1], b
    cdef int N = _n_rows(M)
    out = np.empty((B, M))
    cdef double[:, ::1] o = out
    with nogil:
        for b in range(B):
            _step(&x[b, 0], &w[b, 0], &o[b, 0], N)
    return out


def tri_run_d1(double[:, ::1] x0, double[:, :, ::1] ws):
    cdef Py_ssize_t T = ws.shape[0], B = x0.shape[0], M = x0.shape[1], b, n
    cdef int N = _n_rows(M)
    out = np.empty((T + 1, B, M))
    cdef double[:, :, ::1] o = out
    o[0, :, :] = x0
    with nogil:
        for n in range(T):
            for b in range(B):
                _step(&o[n, b, 0], &ws[n, b, 0], &o[n + 1, b, 0], N)
    return out


def polymer_dp_d1(double[:, :, ::1] v):
    cdef Py_ssize_t B = v.shape[0], n = v.shape[1], N = v.shape[2], b, m, k
    out = np.zeros((B, n + 1, N))
    cdef double[:, :, ::1] z = out
    cdef double c
    with nogil:
        for b in range(B):
            z[b, 0, 0] = 1.0
            for m in range(1, n + 1):
                for k in range(N):
                    c = z[b, m - 1, k]
                    if k > 0:
                        c = c + z[b, m, k - 1]
                    z[b, m, k] = c * v[b, m - 1, k]
    return out


def strict_weak_dp_d1(double[:, :, ::1] u):
    cdef Py_ssize_t B = u.shape[0], n = u.shape[1], N = u.shape[2], b, m, k
    out = np.zeros((B, n + 1, N))
    cdef double[:, :, ::1] L = out
    cdef double val
    with nogil:
        for b in range(B):
            L[b, 0, 0] = 1.0
            for m in range(1, n + 1):
                for k in range(N):
                    val = L[b, m - 1, k] * u[b, m - 1, k]
                    if k > 0:
                        val = L[b, m - 1, k - 1] + val
                    L[b, m, k] = val
    return out


cdef inline double _eval_t(double[:, ::1] ex, double[:, ::1] elz, Py_ssize_t b, int r, int c,
                           int N) noexcept nogil:
    # exp of entry (r, c) of sample b: inner rows from the cached exponentials, row N from the bottom row
    if r == N:
        return elz[c - 1, b]
    return ex[r * (r - 1) // 2 + c - 1, b]


def sigma_sweeps_d1(double[:, ::1] u, double[:, ::1] lz, double[::1] beta, double[:, ::1] sigma,
                    double[:, :, ::1] normals, double[:, :, ::1] uniforms):
    # the local log target is p*u - A e^{-u} - C e^{u}, with A and C fixed by the neighbours;
    # steps, their exponentials and log uniforms are vectorised up front, leaving arithmetic in the loop
    cdef Py_ssize_t B = u.shape[0], F = u.shape[1], S = normals.shape[0], b, s
    cdef int N = <int>lz.shape[1], i, j, k
    cdef double p, old, prop, lo, ln, A, C, xo, xp
    step_arr = np.ascontiguousarray(np.asarray(normals) * np.asarray(sigma).T[None])
    acc_arr = np.zeros((F, B))
    ex_arr = np.ascontiguousarray(np.exp(np.asarray(u)).T)
    ut_arr = np.ascontiguousarray(np.asarray(u).T)
    cdef double[:, :, ::1] step = step_arr
    cdef double[:, :, ::1] estep = np.exp(step_arr)
    cdef double[:, :, ::1] logu = np.log(np.asarray(uniforms))
    cdef double[:, ::1] elz = np.ascontiguousarray(np.exp(np.asarray(lz)).T)
    cdef double[:, ::1] acc = acc_arr
    cdef double[:, ::1] ex = ex_arr
    cdef double[:, ::1] ut = ut_arr
    with nogil:
        for s in range(S):
            k = 0
            for i in range(1, N):
                p = beta[i] - beta[i - 1]
                for j in range(1, i + 1):
                    for b in range(B):
                        A = _eval_t(ex, elz, b, i + 1, j + 1, N)
                        C = 1.0 / _eval_t(ex, elz, b, i + 1, j, N)
                        if j >= 2:
                            C = C + 1.0 / _eval_t(ex, elz, b, i - 1, j - 1, N)
                        if j <= i - 1:
                            A = A + _eval_t(ex, elz, b, i - 1, j, N)
                        old = ut[k, b]
                        xo = ex[k, b]
                        prop = old + step[s, k, b]
                        xp = xo * estep[s, k, b]
                        lo = p * old - A / xo - C * xo
                        ln = p * prop - A / xp - C * xp
                        if logu[s, k, b] < ln - lo:
                            ut[k, b] = prop
                            ex[k, b] = xp
                            acc[k, b] += 1.0
                    k = k + 1
    np.asarray(u)[:] = ut_arr.T
    return acc_arr.T.copy()
