# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np

from libc.math cimport fabs, isfinite


def rank_one_update(double[:, ::1] M, double[:, ::1] P, double[:, ::1] K,
                    double[:, ::1] Q, const double[::1] x, const double[::1] y):
    cdef Py_ssize_t d = M.shape[0], m = M.shape[1]
    cdef Py_ssize_t i, j
    cdef double s = 0.0, acc, gamma, val
    cdef double[::1] Px = np.empty(m)
    cdef double[::1] resid = np.empty(d)

    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += P[i, j] * x[j]
        Px[i] = acc
        s += x[i] * acc
    if not (isfinite(1.0 + s) and 1.0 + s > 0.0):
        raise ArithmeticError(f"rank-one update broke down: 1 + x^T P x = {1.0 + s}")
    gamma = 1.0 / (1.0 + s)

    for i in range(d):
        acc = y[i]
        for j in range(m):
            acc -= M[i, j] * x[j]
        if not isfinite(acc):
            raise ArithmeticError("non-finite residual in rank-one update")
        resid[i] = acc

    for i in range(d):
        for j in range(m):
            M[i, j] += gamma * resid[i] * Px[j]
        for j in range(d):
            Q[i, j] += gamma * resid[i] * resid[j]
    for i in range(m):
        for j in range(i, m):
            val = 0.5 * (P[i, j] + P[j, i]) - gamma * Px[i] * Px[j]
            P[i, j] = val
            P[j, i] = val
        for j in range(m):
            K[i, j] += x[i] * x[j]
    return gamma


def quad_form(const double[:, ::1] P, const double[::1] x):
    cdef Py_ssize_t m = x.shape[0], i, j
    cdef double acc = 0.0, row
    for i in range(m):
        row = 0.0
        for j in range(m):
            row += P[i, j] * x[j]
        acc += x[i] * row
    return acc


cdef double _vertex_value(const double[:, ::1] H, const double[::1] b, double bound,
                          long long mask, Py_ssize_t c, double[::1] u) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc = 0.0, row
    for i in range(c):
        u[i] = bound if (mask >> (c - 1 - i)) & 1 else -bound
    for i in range(c):
        row = b[i] + b[i]
        for j in range(c):
            row += H[i, j] * u[j]
        acc += u[i] * row
    return acc


def box_vertex_argmax(const double[:, ::1] H, const double[::1] b, double bound, double rtol):
    cdef Py_ssize_t c = H.shape[0]
    cdef long long mask, n_vert = 1LL << c, pick = 0
    cdef double best = -1e308, val, tol
    cdef double[::1] u = np.empty(c)
    with nogil:
        for mask in range(n_vert):
            val = _vertex_value(H, b, bound, mask, c, u)
            if val > best:
                best = val
        tol = rtol * (fabs(best) if fabs(best) > 1.0 else 1.0)
        for mask in range(n_vert):
            val = _vertex_value(H, b, bound, mask, c, u)
            if val >= best - tol:
                pick = mask
                break
        _vertex_value(H, b, bound, pick, c, u)
    return np.asarray(u).copy()


def box_cd_argmin(const double[:, ::1] H, const double[::1] b, double bound,
                  u0, double tol, long max_sweeps):
    cdef Py_ssize_t c = H.shape[0], i, j
    cdef long sweep
    cdef double moved, g, new
    cdef double[::1] u = np.clip(np.array(u0, dtype=np.float64), -bound, bound)
    for sweep in range(1, max_sweeps + 1):
        moved = 0.0
        for i in range(c):
            g = b[i]
            for j in range(c):
                if j != i:
                    g += H[i, j] * u[j]
            new = -g / H[i, i]
            if new > bound:
                new = bound
            elif new < -bound:
                new = -bound
            if fabs(new - u[i]) > moved:
                moved = fabs(new - u[i])
            u[i] = new
        if moved <= tol:
            return np.asarray(u), sweep
    return np.asarray(u), max_sweeps


def flip_ascent(const double[:, ::1] H, const double[::1] b, double bound, u0):
    cdef Py_ssize_t c = H.shape[0], i, k
    cdef double[::1] u = np.where(np.asarray(u0) < 0, -bound, bound).astype(np.float64)
    cdef double[::1] grad = np.asarray(H) @ np.asarray(u) + np.asarray(b)
    cdef double delta, qval, ui
    cdef bint improved = True
    while improved:
        improved = False
        for i in range(c):
            qval = 0.0
            for k in range(c):
                qval += u[k] * (grad[k] + b[k])
            ui = u[i]
            delta = -4.0 * ui * grad[i] + 4.0 * ui * ui * H[i, i]
            if delta > 1e-12 * (fabs(qval) if fabs(qval) > 1.0 else 1.0):
                for k in range(c):
                    grad[k] -= 2.0 * ui * H[k, i]
                u[i] = -ui
                improved = True
    return np.asarray(u).copy()
