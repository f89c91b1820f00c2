"""Numerical identity suites for the conjugate model.

Three checks, each returning a :class:`SuiteResult`:

``conjugate_factorization``
    ``N_y(Ax, V) N_A(M, V, K) IW_V(Q, n)`` equals
    ``N_A(M', V, xx^T + K) IW_V(Q + gamma r r^T, n + 1) T_y(Q, n, Mx, gamma)``
    pointwise, with ``r = y - Mx`` and ``M'`` the updated mean.
``joint_entropy``
    The closed-form entropy of ``N_A(M, V, K) IW_V(Q, n)`` against a Monte-Carlo
    estimate of ``-E ln p(A, V)``, plus a 1-D quadrature check of ``H(V)``.
``predictive_invariance``
    ``E ln|Q + gamma (y - mu)(y - mu)^T|`` under ``y ~ T(Q, n, mu, gamma)`` does
    not depend on ``mu`` or ``gamma``.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .distributions import (
    InverseWishartParams,
    MatrixNormalParams,
    MatrixTParams,
    entropy_inverse_wishart,
    entropy_joint_mniw,
    inverse_wishart_logpdf,
    matrix_normal_logpdf,
    matrix_t_logpdf,
    normal_logpdf,
    sample_inverse_wishart,
    sample_mniw,
)
from .linalg import random_pd
from .special import log_multi_gamma

FACTORIZATION_TOL = 1e-8
ENTROPY_RTOL = 0.03
ENTROPY_QUAD_TOL = 1e-3
INVARIANCE_SIGMAS = 3.0

ENTROPY_CASES = ((1, 1), (1, 2), (2, 2), (2, 3))
INVARIANCE_MUS = (0.0, 1.0, -3.0)
INVARIANCE_GAMMAS = (0.1, 0.5, 0.9)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    error: float
    tolerance: float
    seconds: float = 0.0
    details: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<24} {status}  error={self.error:.3e}  tol={self.tolerance:.1e}  ({self.seconds:.2f} s)"


# -- batched log densities (Monte-Carlo only) --------------------------------


def _batch_logdet(X):
    L = np.linalg.cholesky(X)
    return 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1), L


def mniw_logpdf_batch(A, V, M, K, Q, n):
    """``ln N_A(M, V, K) + ln IW_V(Q, n)`` for stacks ``A (N, d, m)``, ``V (N, d, d)``."""
    d, m = M.shape
    logdet_v, Lv = _batch_logdet(V)
    W = np.linalg.solve(Lv, A - M)
    quad = np.einsum("nij,jk,nik->n", W, K, W)
    logdet_k = np.linalg.slogdet(K)[1]
    logdet_q = np.linalg.slogdet(Q)[1]
    log_mn = 0.5 * d * logdet_k - 0.5 * m * (d * math.log(2 * math.pi) + logdet_v) - 0.5 * quad
    Vinv = np.linalg.inv(V)
    trace = np.einsum("nij,ji->n", Vinv, Q)
    log_iw = (
        -log_multi_gamma(d, n)
        - 0.5 * (d + 1) * logdet_v
        + 0.5 * n * (logdet_q - logdet_v - d * math.log(2.0))
        - 0.5 * trace
    )
    return log_mn + log_iw


# -- suites -------------------------------------------------------------------


def _random_tuple(rng, d, m):
    y = rng.standard_normal(d)
    x = rng.standard_normal(m)
    A = rng.standard_normal((d, m))
    M = rng.standard_normal((d, m))
    V = random_pd(d, rng)
    K = random_pd(m, rng)
    Q = random_pd(d, rng)
    n = d - 1 + rng.uniform(0.5, 6.0)
    return y, x, A, V, M, K, Q, n


def factorization_residual(y, x, A, V, M, K, Q, n) -> float:
    """``LHS - RHS`` of the conjugate factorization in log space."""
    d = len(y)
    lhs = (
        normal_logpdf(y, A @ x, V)
        + matrix_normal_logpdf(A, MatrixNormalParams(M, V, K))
        + inverse_wishart_logpdf(V, InverseWishartParams(Q, n))
    )
    K_new = K + np.outer(x, x)
    M_new = np.linalg.solve(K_new.T, (M @ K + np.outer(y, x)).T).T
    gamma = 1.0 - x @ np.linalg.solve(K_new, x)
    r = y - M @ x
    rhs = (
        matrix_normal_logpdf(A, MatrixNormalParams(M_new, V, K_new))
        + inverse_wishart_logpdf(V, InverseWishartParams(Q + gamma * np.outer(r, r), n + 1))
        + matrix_t_logpdf(y.reshape(d, 1), MatrixTParams(Q, n, M @ x, np.array([[gamma]])))
    )
    return lhs - rhs


def conjugate_factorization(cases: int = 200, d: int = 2, m: int = 3, seed: int = 0) -> SuiteResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    errs = [abs(factorization_residual(*_random_tuple(rng, d, m))) for _ in range(cases)]
    worst = max(errs)
    return SuiteResult("conjugate_factorization", worst < FACTORIZATION_TOL, worst, FACTORIZATION_TOL,
                       time.perf_counter() - start, [f"{cases} random tuples, d={d}, m={m}"])


def mc_joint_entropy(M, K, Q, n, draws: int, rng) -> tuple:
    """``(estimate, standard_error)`` of ``-E ln p(A, V)``."""
    A, V = sample_mniw(M, K, Q, n, rng, draws)
    logp = mniw_logpdf_batch(A, V, M, K, Q, n)
    return float(-logp.mean()), float(logp.std(ddof=1) / math.sqrt(draws))


def iw_entropy_quadrature(Q: float, n: float) -> float:
    """``-int p ln p`` for the 1-D inverse Wishart by adaptive quadrature."""
    p = InverseWishartParams(np.array([[Q]]), n)

    def integrand(v):
        lp = inverse_wishart_logpdf(np.array([[v]]), p)
        return -math.exp(lp) * lp

    # the mode sits at Q / (n + 2); split there so quad sees the peak
    mode = Q / (n + 2)
    total = 0.0
    for a, b in ((0.0, mode), (mode, 10 * mode), (10 * mode, np.inf)):
        total += integrate.quad(integrand, a, b, limit=200, epsabs=1e-12, epsrel=1e-10)[0]
    return total


def joint_entropy(draws: int = 100_000, seed: int = 0, cases=ENTROPY_CASES) -> SuiteResult:
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    details, worst, ok = [], 0.0, True
    for d, m in cases:
        M = rng.standard_normal((d, m))
        K = random_pd(m, rng)
        Q = random_pd(d, rng)
        n = d + 3.0
        closed = entropy_joint_mniw(K, Q, d, m, n)
        est, se = mc_joint_entropy(M, K, Q, n, draws, rng)
        rel = abs(est - closed) / abs(closed)
        worst = max(worst, rel)
        ok &= rel < ENTROPY_RTOL
        details.append(f"d={d} m={m}: closed={closed:.5f} mc={est:.5f}+-{se:.5f} rel={rel:.2e}")
    closed_v = entropy_inverse_wishart(InverseWishartParams(np.array([[2.0]]), 5.0))
    quad_v = iw_entropy_quadrature(2.0, 5.0)
    quad_err = abs(closed_v - quad_v)
    ok &= quad_err < ENTROPY_QUAD_TOL
    details.append(f"H(V) d=1 Q=2 n=5: closed={closed_v:.8f} quad={quad_v:.8f} err={quad_err:.2e}")
    return SuiteResult("joint_entropy", bool(ok), worst, ENTROPY_RTOL, time.perf_counter() - start, details)


def mc_invariance_integral(Q, n: float, mu, gamma: float, draws: int, rng) -> tuple:
    """``(estimate, standard_error)`` of ``E ln|Q + gamma (y - mu)(y - mu)^T|``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    d = Q.shape[0]
    V = sample_inverse_wishart(InverseWishartParams(Q, n), rng, draws)
    z = rng.standard_normal((draws, d, 1))
    D = (np.linalg.cholesky(V) @ z)[..., 0] / math.sqrt(gamma)
    vals = np.linalg.slogdet(Q + gamma * np.einsum("ni,nj->nij", D, D))[1]
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(draws))


def predictive_invariance(draws: int = 100_000, seed: int = 0) -> SuiteResult:
    start = time.perf_counter()
    details, worst, ok = [], 0.0, True
    for d in (1, 2):
        Q = np.eye(1) * 1.5 if d == 1 else np.array([[1.5, 0.4], [0.4, 0.8]])
        n = d + 2.0
        ests = []
        for k, (mu, gamma) in enumerate(itertools.product(INVARIANCE_MUS, INVARIANCE_GAMMAS)):
            rng = np.random.default_rng(np.random.SeedSequence([seed, d, k]))
            ests.append(mc_invariance_integral(Q, n, np.full(d, mu), gamma, draws, rng))
        for (a, sa), (b, sb) in itertools.combinations(ests, 2):
            z = abs(a - b) / math.hypot(sa, sb)
            worst = max(worst, z)
            ok &= z < INVARIANCE_SIGMAS
        vals = [e for e, _ in ests]
        details.append(f"d={d}: estimates in [{min(vals):.5f}, {max(vals):.5f}], se~{ests[0][1]:.1e}")
    return SuiteResult("predictive_invariance", bool(ok), worst, INVARIANCE_SIGMAS,
                       time.perf_counter() - start, details)


SUITES = {
    "conjugate_factorization": conjugate_factorization,
    "joint_entropy": joint_entropy,
    "predictive_invariance": predictive_invariance,
}


def run_all(seed: int = 0) -> list:
    return [fn(seed=seed) for fn in SUITES.values()]
