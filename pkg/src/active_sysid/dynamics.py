"""Ground-truth plant ``r_{t+1} = g(sum_i F_i r_{t-i} + sum_j B_j u_{t+1-j} + e_{t+1})``.

The regressor layout is ``x_{t+1} = [r_{t-I}; ...; r_t; u_{t-J+1}; ...; u_{t+1}]``
and the stacked parameters are ``A = [F_I, ..., F_0, B_J, ..., B_0]`` so that
``g^{-1}(r_{t+1}) = A x_{t+1} + e_{t+1}``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .linalg import cholesky_pd, random_pd


class LinkDomainError(ValueError):
    """Observation lies outside the range of the link function."""


@dataclass(frozen=True)
class LinkFn:
    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in ("identity", "tanh"):
            raise ValueError(f"unknown link {self.kind!r}; expected 'identity' or 'tanh'")

    def forward(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return np.array(z, dtype=float)
        return np.tanh(z)

    def inverse(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "identity":
            return r.copy()
        if np.any(np.abs(r) >= 1.0) or not np.all(np.isfinite(r)):
            raise LinkDomainError(f"tanh inverse needs |r| < 1 componentwise, got {r}")
        return np.arctanh(r)


@dataclass
class ModelSpec:
    F: list
    B: list
    V_true: np.ndarray
    link: LinkFn = field(default_factory=LinkFn)

    def __post_init__(self):
        self.F = [np.atleast_2d(np.asarray(f, dtype=float)) for f in self.F]
        self.B = [np.atleast_2d(np.asarray(b, dtype=float)) for b in self.B]
        self.V_true = np.atleast_2d(np.asarray(self.V_true, dtype=float))
        if isinstance(self.link, str):
            self.link = LinkFn(self.link)
        if not self.F or not self.B:
            raise ValueError("need at least one F and one B matrix")
        d = self.F[0].shape[0]
        c = self.B[0].shape[1]
        for i, f in enumerate(self.F):
            if f.shape != (d, d):
                raise ValueError(f"F[{i}] has shape {f.shape}, expected {(d, d)}")
        for j, b in enumerate(self.B):
            if b.shape != (d, c):
                raise ValueError(f"B[{j}] has shape {b.shape}, expected {(d, c)}")
        if self.V_true.shape != (d, d):
            raise ValueError(f"V_true has shape {self.V_true.shape}, expected {(d, d)}")
        for mat in [*self.F, *self.B, self.V_true]:
            if not np.all(np.isfinite(mat)):
                raise ValueError("model matrices must be finite")
        self._noise_chol = cholesky_pd(self.V_true, "V_true")

    @property
    def d(self) -> int:
        return self.F[0].shape[0]

    @property
    def c(self) -> int:
        return self.B[0].shape[1]

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.F) - 1

    @property
    def J(self) -> int:
        return len(self.B) - 1

    @property
    def m(self) -> int:
        return regressor_dim(self.d, self.c, self.I, self.J)

    @property
    def warmup(self) -> int:
        return max(self.I, self.J) + 1

    def to_dict(self) -> dict:
        return {
            "F": [f.tolist() for f in self.F],
            "B": [b.tolist() for b in self.B],
            "V": self.V_true.tolist(),
            "link": self.link.kind,
        }


def regressor_dim(d: int, c: int, I: int, J: int) -> int:  # noqa: E741
    return d * (I + 1) + c * (J + 1)


class History:
    """The last ``I + 1`` activities and last ``J`` controls, oldest first."""

    def __init__(self, d: int, c: int, I: int, J: int):  # noqa: E741
        self.d, self.c, self.I, self.J = d, c, I, J
        self.r_buffer = deque((np.zeros(d) for _ in range(I + 1)), maxlen=I + 1)
        self.u_buffer = deque((np.zeros(c) for _ in range(J)), maxlen=max(J, 1))
        self.t = 0

    @classmethod
    def for_model(cls, spec: ModelSpec) -> "History":
        return cls(spec.d, spec.c, spec.I, spec.J)

    @property
    def r_t(self) -> np.ndarray:
        return self.r_buffer[-1]

    def advance(self, r_next, u_next) -> None:
        self.r_buffer.append(np.asarray(r_next, dtype=float).copy())
        if self.J > 0:
            self.u_buffer.append(np.asarray(u_next, dtype=float).copy())
        self.t += 1

    def fixed_part(self) -> np.ndarray:
        """Regressor entries that do not depend on ``u_{t+1}``."""
        parts = list(self.r_buffer)
        if self.J > 0:
            parts.extend(self.u_buffer)
        return np.concatenate(parts)

    def copy(self) -> "History":
        h = History(self.d, self.c, self.I, self.J)
        h.r_buffer = deque((r.copy() for r in self.r_buffer), maxlen=self.I + 1)
        h.u_buffer = deque((u.copy() for u in self.u_buffer), maxlen=max(self.J, 1))
        h.t = self.t
        return h


def build_regressor(h: History, u_next) -> np.ndarray:
    u_next = np.asarray(u_next, dtype=float).ravel()
    if u_next.shape != (h.c,):
        raise ValueError(f"control has shape {u_next.shape}, expected {(h.c,)}")
    return np.concatenate([h.fixed_part(), u_next])


def stack_parameters(spec: ModelSpec) -> np.ndarray:
    """``A = [F_I, ..., F_0, B_J, ..., B_0]`` (``d x m``)."""
    return np.hstack([*reversed(spec.F), *reversed(spec.B)])


def step(spec: ModelSpec, h: History, u_next, rng: np.random.Generator | None = None, noise=None):
    """One plant step; returns ``(r_next, e_next)`` without touching ``h``.

    ``noise`` forces the driving noise (used by tests); otherwise it is drawn
    from ``N(0, V_true)`` with ``rng``.
    """
    x = build_regressor(h, u_next)
    if noise is None:
        if rng is None:
            raise ValueError("step needs an rng when noise is not forced")
        e = spec._noise_chol @ rng.standard_normal(spec.d)
    else:
        e = np.asarray(noise, dtype=float).reshape(spec.d)
    r_next = spec.link.forward(stack_parameters(spec) @ x + e)
    return r_next, e


def linearize_observation(spec: ModelSpec, r_next) -> np.ndarray:
    """``y = g^{-1}(r)``; tanh inputs outside (-1, 1) raise :class:`LinkDomainError`."""
    return spec.link.inverse(r_next)


def random_model(
    d: int,
    c: int,
    I: int,  # noqa: E741
    J: int,
    rng: np.random.Generator,
    spectral_radius: float = 0.9,
    noise_scale: float = 0.1,
    input_scale: float = 1.0,
    link: str = "identity",
) -> ModelSpec:
    """Random stable plant.

    ``F`` blocks start with standard normal entries and share one scale factor,
    found by bisection, that puts the companion matrix of the recurrence at the
    requested spectral radius. ``B`` entries are ``N(0, input_scale**2)`` and
    ``V_true = noise_scale**2 * W`` with ``W`` having eigenvalues in
    ``[0.5, 1.5]``.
    """
    F = [rng.standard_normal((d, d)) for _ in range(I + 1)]
    F = [f * _radius_scale(F, spectral_radius) for f in F]
    B = [input_scale * rng.standard_normal((d, c)) for _ in range(J + 1)]
    V = noise_scale**2 * random_pd(d, rng, 0.5, 1.5)
    return ModelSpec(F, B, V, LinkFn(link))


def _radius_scale(F, target: float) -> float:
    # companion radius is continuous and increasing in a common scale factor
    lo, hi = 0.0, 1.0
    while _companion_radius([f * hi for f in F]) < target:
        hi *= 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _companion_radius([f * mid for f in F]) < target:
            lo = mid
        else:
            hi = mid
    return lo


def _companion_radius(F) -> float:
    d = F[0].shape[0]
    k = len(F)
    C = np.zeros((d * k, d * k))
    C[:d, :] = np.hstack(F)
    if k > 1:
        C[d:, :-d] = np.eye(d * (k - 1))
    return float(np.max(np.abs(np.linalg.eigvals(C))))
