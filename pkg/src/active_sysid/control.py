"""Stimulus design on the quadratic ``q(u) = x(u)^T K^{-1} x(u)``.

With ``x = [z; u]`` (``z`` the history part of the regressor) and
``P = K^{-1}`` partitioned conformally, ``q(u) = u^T P_uu u + 2 u^T P_uz z +
z^T P_zz z``. Parameter identification (infomax) maximizes ``q`` over the
admissible set; noise estimation minimizes it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .dynamics import History
from .estimator import PosteriorState

VERTEX_LIMIT = 16
TIE_RTOL = 1e-12
CD_TOL = 1e-10
CD_MAX_SWEEPS = 200_000
ASCENT_STARTS = 8

STRATEGY_KINDS = ("infomax", "noise_optimal", "tau_infomax", "tau_zero", "random", "zero")


@dataclass(frozen=True)
class ControlDomain:
    kind: str = "box"
    bound: float = 1.0
    tie_break: str = "lexicographic_min"

    def __post_init__(self):
        if self.kind not in ("box", "ball"):
            raise ValueError(f"domain kind must be 'box' or 'ball', got {self.kind!r}")
        if not (self.bound > 0 and math.isfinite(self.bound)):
            raise ValueError(f"domain bound must be positive, got {self.bound}")
        if self.tie_break != "lexicographic_min":
            raise ValueError(f"unsupported tie_break {self.tie_break!r}")

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = np.asarray(u)
        norm = np.max(np.abs(u)) if self.kind == "box" else np.linalg.norm(u)
        return bool(norm <= self.bound * (1 + tol))


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "infomax"
    domain: ControlDomain = field(default_factory=ControlDomain)
    tau: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGY_KINDS}")
        if self.kind in ("tau_infomax", "tau_zero"):
            if self.tau is None or self.tau < 0:
                raise ValueError(f"{self.kind} needs tau >= 0")

    @property
    def label(self) -> str:
        return f"{self.kind}({self.tau})" if self.kind.startswith("tau_") else self.kind


def _blocks(s: PosteriorState, h: History):
    z = h.fixed_part()
    c = h.c
    if z.shape[0] + c != s.m:
        raise ValueError(f"history gives regressor length {z.shape[0] + c}, posterior has m={s.m}")
    P = s.P
    H = np.ascontiguousarray(P[-c:, -c:])
    b = np.ascontiguousarray(P[-c:, :-c] @ z)
    return z, H, b


def quadratic_form(s: PosteriorState, x) -> float:
    """``x^T K^{-1} x`` using the cached inverse."""
    return kernels.quad_form(s.P, np.ascontiguousarray(x, dtype=float))


def control_objective(s: PosteriorState, h: History, u) -> float:
    return quadratic_form(s, np.concatenate([h.fixed_part(), np.asarray(u, dtype=float).ravel()]))


def _lexmin(cands):
    return min(cands, key=lambda v: tuple(v))


def infomax_control(s: PosteriorState, h: History, dom: ControlDomain) -> np.ndarray:
    """Maximize ``q`` over the domain.

    Box, ``c <= 16``: exact vertex enumeration. Box, larger ``c``: greedy
    single-flip ascent from ``ASCENT_STARTS`` seeded vertices, so the answer
    beats every single-coordinate flip. Ball: the boundary maximizer from the
    secular equation.
    """
    _, H, b = _blocks(s, h)
    c = H.shape[0]
    if dom.kind == "box":
        if c <= VERTEX_LIMIT:
            return kernels.box_vertex_argmax(H, b, dom.bound, TIE_RTOL)
        rng = np.random.default_rng(0)
        best_val, cands = -np.inf, []
        for _ in range(ASCENT_STARTS):
            start = np.where(rng.random(c) < 0.5, -dom.bound, dom.bound)
            u = kernels.flip_ascent(H, b, dom.bound, start)
            val = float(u @ H @ u + 2 * b @ u)
            tol = TIE_RTOL * max(1.0, abs(best_val) if np.isfinite(best_val) else 1.0)
            if val > best_val + tol:
                best_val, cands = val, [u]
            elif val >= best_val - tol:
                cands.append(u)
        return _lexmin(cands)
    return _ball_max(H, b, dom.bound)


def _ball_max(H, b, R):
    h, Vec = np.linalg.eigh(H)
    beta = Vec.T @ b
    top = h[-1]
    scale = max(1.0, np.max(np.abs(h)))
    lo = top + 1e-13 * scale
    hi = top + np.linalg.norm(b) / R + 1e-13 * scale

    def excess(lam):
        return np.linalg.norm(beta / (lam - h)) - R

    if excess(lo) > 0:
        lam = brentq(excess, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        return Vec @ (beta / (lam - h))
    # hard case: the linear term barely touches the top eigenspace, so the
    # maximizer moves along the top eigenvector until it hits the sphere
    on_top = np.abs(h - top) <= 1e-13 * scale
    rest = np.zeros_like(beta)
    rest[~on_top] = beta[~on_top] / (top - h[~on_top])
    u_rest = Vec @ rest
    v = Vec[:, np.flatnonzero(on_top)[0]] * math.sqrt(max(R * R - rest @ rest, 0.0))
    return _lexmin([u_rest + v, u_rest - v])


def noise_optimal_control(s: PosteriorState, h: History, dom: ControlDomain) -> np.ndarray:
    """Exact minimizer of ``q`` over the domain.

    Unconstrained: ``u* = -P_uu^{-1} P_uz z``, equivalently ``K_uz K_zz^{-1} z``.
    Box: projected coordinate descent to ``1e-10``. Ball: the boundary point
    solving ``(P_uu + lam I) u = -P_uz z`` for ``lam > 0``.
    """
    _, H, b = _blocks(s, h)
    try:
        u_star = -np.linalg.solve(H, b)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("control block of K^{-1} is singular") from exc
    if dom.contains(u_star, tol=0.0):
        return u_star
    if dom.kind == "box":
        u, _ = kernels.box_cd_argmin(H, b, dom.bound, np.clip(u_star, -dom.bound, dom.bound), CD_TOL, CD_MAX_SWEEPS)
        return np.asarray(u)
    return _ball_min(H, b, dom.bound)


def _ball_min(H, b, R):
    h, Vec = np.linalg.eigh(H)
    beta = Vec.T @ b

    def excess(lam):
        return np.linalg.norm(beta / (h + lam)) - R

    lam = brentq(excess, 0.0, np.linalg.norm(b) / R, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return -Vec @ (beta / (h + lam))


def block_ratio_control(s: PosteriorState, h: History) -> np.ndarray:
    """The block-ratio closed form ``(K_uu)^{-1} K_uz z``.

    Kept for comparison only; it is not the minimizer of ``q`` in general
    (see :func:`noise_control_comparison`).
    """
    z = h.fixed_part()
    c = h.c
    K = s.K
    return np.linalg.solve(K[-c:, -c:], K[-c:, :-c] @ z)


def unconstrained_noise_optimum(s: PosteriorState, h: History) -> float:
    """``z^T K_zz^{-1} z``: the minimum of ``q`` over unconstrained ``u``."""
    z = h.fixed_part()
    c = h.c
    return float(z @ np.linalg.solve(s.K[:-c, :-c], z))


def zero_control(h: History) -> np.ndarray:
    return np.zeros(h.c)


def random_control(dom: ControlDomain, c: int, rng: np.random.Generator) -> np.ndarray:
    if dom.kind == "box":
        return rng.uniform(-dom.bound, dom.bound, size=c)
    direction = rng.standard_normal(c)
    direction /= np.linalg.norm(direction)
    return dom.bound * rng.random() ** (1.0 / c) * direction


def select_control(strategy: StrategySpec, s: PosteriorState, h: History, t: int,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Dispatch on the strategy kind; ``t`` counts posterior updates done so far."""
    kind = strategy.kind
    if kind == "tau_infomax":
        kind = "infomax" if t < strategy.tau else "noise_optimal"
    elif kind == "tau_zero":
        kind = "infomax" if t < strategy.tau else "zero"
    if kind == "infomax":
        return infomax_control(s, h, strategy.domain)
    if kind == "noise_optimal":
        return noise_optimal_control(s, h, strategy.domain)
    if kind == "zero":
        return zero_control(h)
    if rng is None:
        rng = np.random.default_rng(strategy.seed)
    return random_control(strategy.domain, h.c, rng)


def noise_control_comparison(K=((1.0, 1.0), (1.0, 4.0)), z=(1.0,)) -> dict:
    """Exact minimizer vs. the block-ratio closed form on a small instance.

    Defaults to ``K = [[1, 1], [1, 4]]``, ``z = 1``, where the exact
    minimizer is ``u = 1`` with ``q = 1`` and the block-ratio form gives
    ``u = 0.25`` with ``q = 1.1875``.
    """
    K = np.asarray(K, dtype=float)
    z = np.asarray(z, dtype=float)
    m = K.shape[0]
    c = m - z.shape[0]
    P = np.linalg.inv(K)
    s = PosteriorState(np.zeros((1, m)), K, P, np.eye(1), 3.0)
    h = History(d=z.shape[0], c=c, I=0, J=0)
    h.r_buffer[-1] = z.copy()
    unbounded = ControlDomain("box", 1e6)
    u_exact = noise_optimal_control(s, h, unbounded)
    u_block_ratio = block_ratio_control(s, h)
    return {
        "u_exact": u_exact.tolist(),
        "objective_exact": control_objective(s, h, u_exact),
        "u_block_ratio": u_block_ratio.tolist(),
        "objective_block_ratio": control_objective(s, h, u_block_ratio),
        "closed_form_minimum": unconstrained_noise_optimum(s, h),
    }
