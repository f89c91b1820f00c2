"""Exact recursive posterior over ``(A, V)`` for ``y = A x + e``, ``e ~ N(0, V)``.

The belief is ``A | V ~ N(M, V, K)`` and ``V ~ IW(Q, n)``. One observation
``(x, y)`` maps it to::

    gamma = 1 - x^T (x x^T + K)^{-1} x = 1 / (1 + x^T P x)
    M'    = (M K + y x^T)(x x^T + K)^{-1}
    K'    = K + x x^T
    Q'    = Q + gamma (y - M x)(y - M x)^T
    n'    = n + 1

with ``P = K^{-1}`` carried along by Sherman-Morrison.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .distributions import MatrixTParams, entropy_joint_mniw, matrix_t_logpdf
from .linalg import NotPositiveDefiniteError, as_matrix, cholesky_pd, inv_pd, symmetrize

REFRESH_EVERY = 500
DRIFT_CHECK_EVERY = 50
DRIFT_TOL = 1e-6


class EstimatorError(ArithmeticError):
    """The posterior could not be advanced; the input state is untouched."""


@dataclass
class PosteriorState:
    M: np.ndarray
    K: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    n: float
    t: int = 0
    since_refresh: int = 0

    @property
    def d(self) -> int:
        return self.M.shape[0]

    @property
    def m(self) -> int:
        return self.M.shape[1]

    def copy(self) -> "PosteriorState":
        return PosteriorState(
            self.M.copy(), self.K.copy(), self.P.copy(), self.Q.copy(), self.n, self.t, self.since_refresh
        )

    def drift(self) -> float:
        """``max |P K - I|``."""
        return float(np.max(np.abs(self.P @ self.K - np.eye(self.m))))

    def refresh(self) -> None:
        """Recompute ``P`` from ``K`` by a direct symmetric solve."""
        self.P = inv_pd(self.K, "K")
        self.since_refresh = 0

    def to_json(self) -> str:
        def mat(X):
            return {"rows": X.shape[0], "cols": X.shape[1], "data": X.ravel().tolist()}

        return json.dumps(
            {
                "d": self.d,
                "m": self.m,
                "n": self.n,
                "t": self.t,
                "since_refresh": self.since_refresh,
                "M": mat(self.M),
                "K": mat(self.K),
                "P": mat(self.P),
                "Q": mat(self.Q),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PosteriorState":
        doc = json.loads(text)

        def mat(entry):
            return np.asarray(entry["data"], dtype=float).reshape(entry["rows"], entry["cols"])

        state = cls(
            mat(doc["M"]), mat(doc["K"]), mat(doc["P"]), mat(doc["Q"]),
            float(doc["n"]), int(doc["t"]), int(doc.get("since_refresh", 0)),
        )
        _validate(state)
        return state


@dataclass(frozen=True)
class UpdateDiagnostics:
    gamma: float
    predictive_logpdf: float
    entropy_after: float


def _validate(s: PosteriorState) -> None:
    d, m = s.M.shape
    if s.K.shape != (m, m) or s.P.shape != (m, m) or s.Q.shape != (d, d):
        raise ValueError("inconsistent posterior shapes")
    cholesky_pd(s.K, "K")
    cholesky_pd(s.Q, "Q")
    if not s.n > d - 1:
        raise ValueError(f"n must exceed d - 1 = {d - 1}, got {s.n}")


def init(M0, K0, Q0, n0: float) -> PosteriorState:
    M0 = np.atleast_2d(np.asarray(M0, dtype=float))
    K0 = symmetrize(as_matrix(K0, "K0"))
    Q0 = symmetrize(as_matrix(Q0, "Q0"))
    state = PosteriorState(M0.copy(), K0.copy(), np.eye(K0.shape[0]), Q0.copy(), float(n0))
    _validate(state)
    state.refresh()
    return state


def default_prior(d: int, m: int, kappa: float = 1e-2, q_scale: float = 1.0, n0: float | None = None) -> PosteriorState:
    """``M0 = 0``, ``K0 = kappa I``, ``Q0 = q_scale I``, ``n0 = d + 2``."""
    return init(np.zeros((d, m)), kappa * np.eye(m), q_scale * np.eye(d), d + 2 if n0 is None else n0)


def _coerce(s: PosteriorState, x, y=None):
    x = np.ascontiguousarray(x, dtype=float).ravel()
    if x.shape != (s.m,):
        raise ValueError(f"regressor has shape {x.shape}, expected {(s.m,)}")
    if not np.all(np.isfinite(x)):
        raise EstimatorError("regressor has non-finite entries")
    if y is None:
        return x
    y = np.ascontiguousarray(y, dtype=float).ravel()
    if y.shape != (s.d,):
        raise ValueError(f"observation has shape {y.shape}, expected {(s.d,)}")
    if not np.all(np.isfinite(y)):
        raise EstimatorError("observation has non-finite entries")
    return x, y


def gamma_of(s: PosteriorState, x) -> float:
    x = _coerce(s, x)
    return 1.0 / (1.0 + kernels.quad_form(s.P, x))


def update_inplace(s: PosteriorState, x, y) -> float:
    """Advance ``s`` in place and return ``gamma``.

    Used by the closed-loop runner; :func:`update` is the non-mutating form.
    Failures are detected before anything is written, so ``s`` is unchanged
    when :class:`EstimatorError` is raised by the kernel; a failed periodic
    refresh leaves the updated ``K`` with a stale ``P``.
    """
    x, y = _coerce(s, x, y)
    try:
        gamma = kernels.rank_one_update(s.M, s.P, s.K, s.Q, x, y)
    except ArithmeticError as exc:
        raise EstimatorError(str(exc)) from exc
    s.n += 1.0
    s.t += 1
    s.since_refresh += 1
    if s.since_refresh >= REFRESH_EVERY or (
        s.since_refresh % DRIFT_CHECK_EVERY == 0 and s.drift() > DRIFT_TOL
    ):
        try:
            s.refresh()
        except NotPositiveDefiniteError as exc:
            raise EstimatorError(f"precision matrix lost definiteness: {exc}") from exc
    return gamma


def update(s: PosteriorState, x, y, diagnostics: bool = True):
    """Return ``(new_state, UpdateDiagnostics)``; ``s`` is never modified."""
    x, y = _coerce(s, x, y)
    pred = predictive_logpdf(s, x, y) if diagnostics else float("nan")
    new = s.copy()
    gamma = update_inplace(new, x, y)
    entropy = posterior_entropy(new) if diagnostics else float("nan")
    return new, UpdateDiagnostics(gamma, pred, entropy)


def batch_posterior(M0, K0, Q0, n0, X, Y) -> PosteriorState:
    """Fold :func:`update` over paired regressors and observations."""
    X = list(X)
    Y = list(Y)
    if len(X) != len(Y):
        raise ValueError(f"got {len(X)} regressors and {len(Y)} observations")
    s = init(M0, K0, Q0, n0)
    for x, y in zip(X, Y):
        update_inplace(s, x, y)
    return s


def predictive_logpdf(s: PosteriorState, x, y) -> float:
    """``ln T_y(Q, n, M x, gamma)``: the one-step-ahead predictive density."""
    x, y = _coerce(s, x, y)
    gamma = gamma_of(s, x)
    if not 0.0 < gamma <= 1.0:
        raise EstimatorError(f"invalid gamma {gamma}")
    return matrix_t_logpdf(y, MatrixTParams(s.Q, s.n, s.M @ x, np.array([[gamma]])))


def posterior_entropy(s: PosteriorState) -> float:
    return entropy_joint_mniw(s.K, s.Q, s.d, s.m, s.n)


def estimate_noise(s: PosteriorState, x, y, use_updated: bool = False) -> np.ndarray:
    """``e_hat = y - M x`` with the pre-update mean; ``use_updated`` first folds in ``(x, y)``."""
    x, y = _coerce(s, x, y)
    if use_updated:
        s = update(s, x, y, diagnostics=False)[0]
    return y - s.M @ x


def noise_covariance_estimate(s: PosteriorState) -> np.ndarray:
    """Posterior mean of ``V``: ``Q / (n - d - 1)``."""
    if not s.n > s.d + 1:
        raise ValueError(f"posterior mean of V needs n > d + 1 = {s.d + 1}, got {s.n}")
    return s.Q / (s.n - s.d - 1)


def logdet_growth(s: PosteriorState, x) -> float:
    """``ln|K + x x^T| - ln|K| = ln(1 + x^T P x)``."""
    return math.log1p(kernels.quad_form(s.P, _coerce(s, x)))
