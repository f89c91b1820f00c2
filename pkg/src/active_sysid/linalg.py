"""Positive-definite matrix helpers shared by every module."""
from __future__ import annotations

import numpy as np

MIN_PIVOT = 1e-10


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be symmetric PD is not."""


def symmetrize(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def as_matrix(X, name: str = "matrix") -> np.ndarray:
    """Coerce scalars and 1x1 inputs to a finite 2-D float array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} has non-finite entries")
    return X


def cholesky_pd(X, name: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor of ``(X + X.T) / 2``.

    Raises :class:`NotPositiveDefiniteError` if factorization fails or any
    pivot ``L[i, i]**2`` falls below ``MIN_PIVOT``.
    """
    X = as_matrix(X, name)
    try:
        L = np.linalg.cholesky(symmetrize(X))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from exc
    if np.min(np.diag(L)) ** 2 < MIN_PIVOT:
        raise NotPositiveDefiniteError(
            f"{name} is numerically singular (min pivot {np.min(np.diag(L)) ** 2:.3e})"
        )
    return L


def logdet_pd(X, name: str = "matrix") -> float:
    L = cholesky_pd(X, name)
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def inv_pd(X, name: str = "matrix") -> np.ndarray:
    """Inverse of a PD matrix through its Cholesky factor (result symmetrized)."""
    L = cholesky_pd(X, name)
    Linv = np.linalg.solve(L, np.eye(L.shape[0]))
    return Linv.T @ Linv


def is_pd(X) -> bool:
    try:
        cholesky_pd(X)
    except (NotPositiveDefiniteError, ValueError):
        return False
    return True


def random_pd(dim: int, rng: np.random.Generator, low: float = 0.5, high: float = 2.0) -> np.ndarray:
    """Random SPD matrix with eigenvalues drawn uniformly from ``[low, high]``."""
    Qm, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    eig = rng.uniform(low, high, size=dim)
    return symmetrize((Qm * eig) @ Qm.T)
