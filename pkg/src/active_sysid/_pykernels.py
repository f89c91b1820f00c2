"""Pure numpy implementations of the hot kernels.

Same signatures and semantics as ``_ckernels``; used when the compiled
extension is unavailable or ``ACTIVE_SYSID_PURE_PYTHON`` is set. Quadratic
objectives are ``q(u) = u^T H u + 2 b^T u``.
"""
import numpy as np


def rank_one_update(M, P, K, Q, x, y):
    """In-place conjugate update with one ``(x, y)`` pair; returns ``gamma``.

    ``P = K^{-1}`` is advanced by Sherman-Morrison. Nothing is written if the
    update would be non-finite.
    """
    Px = P @ x
    s = float(x @ Px)
    denom = 1.0 + s
    if not (np.isfinite(denom) and denom > 0.0):
        raise ArithmeticError(f"rank-one update broke down: 1 + x^T P x = {denom}")
    gamma = 1.0 / denom
    resid = y - M @ x
    if not np.all(np.isfinite(resid)):
        raise ArithmeticError("non-finite residual in rank-one update")
    M += gamma * np.outer(resid, Px)
    Q += gamma * np.outer(resid, resid)
    P -= gamma * np.outer(Px, Px)
    P[...] = 0.5 * (P + P.T)
    K += np.outer(x, x)
    return gamma


def quad_form(P, x):
    return float(x @ P @ x)


def _vertices(c, bound):
    bits = (np.arange(2**c)[:, None] >> np.arange(c - 1, -1, -1)) & 1
    return bound * (2.0 * bits - 1.0)


def box_vertex_argmax(H, b, bound, rtol):
    """Lexicographically smallest vertex of ``[-bound, bound]^c`` maximizing ``q``.

    Vertices are enumerated in lexicographic order; the first one within
    ``rtol * max(1, |best|)`` of the maximum wins.
    """
    c = H.shape[0]
    U = _vertices(c, bound)
    vals = np.einsum("ki,ij,kj->k", U, H, U) + 2.0 * U @ b
    best = vals.max()
    tol = rtol * max(1.0, abs(best))
    k = int(np.flatnonzero(vals >= best - tol)[0])
    return U[k].copy()


def box_cd_argmin(H, b, bound, u0, tol, max_sweeps):
    """Projected cyclic coordinate descent for ``min q`` over the box.

    Returns ``(u, sweeps)``; stops when no coordinate moves by more than ``tol``.
    """
    u = np.clip(np.array(u0, dtype=float), -bound, bound)
    c = u.shape[0]
    diag = np.diag(H).copy()
    for sweep in range(1, max_sweeps + 1):
        moved = 0.0
        for i in range(c):
            g = b[i] + H[i] @ u - diag[i] * u[i]
            new = min(bound, max(-bound, -g / diag[i]))
            moved = max(moved, abs(new - u[i]))
            u[i] = new
        if moved <= tol:
            return u, sweep
    return u, max_sweeps


def flip_ascent(H, b, bound, u0):
    """Greedy single-coordinate flips from vertex ``u0`` until no flip improves ``q``."""
    u = np.where(np.asarray(u0) < 0, -bound, bound).astype(float)
    c = u.shape[0]
    grad = H @ u + b
    improved = True
    while improved:
        improved = False
        for i in range(c):
            # q(u - 2 u_i e_i) - q(u) = -4 u_i (Hu + b)_i + 4 u_i^2 H_ii
            delta = -4.0 * u[i] * grad[i] + 4.0 * u[i] * u[i] * H[i, i]
            if delta > 1e-12 * max(1.0, abs(u @ H @ u + 2 * b @ u)):
                grad -= 2.0 * u[i] * H[:, i]
                u[i] = -u[i]
                improved = True
    return u
