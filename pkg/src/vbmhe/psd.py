"""Symmetric positive-definite matrix helpers and Loewner-interval sets.

Matrices are plain ``numpy`` arrays; the helpers here validate and
symmetrize them at module boundaries rather than wrapping them in a
dedicated type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

SYMMETRY_RTOL = 1e-8


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a matrix expected to be positive definite is not."""


def symmetrize(X: np.ndarray) -> np.ndarray:
    """Return ``(X + X^T) / 2``; works on stacks of matrices too."""
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def check_symmetric(X: np.ndarray, name: str = "matrix") -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"{name} must be square, got shape {X.shape}")
    scale = 1.0 + np.max(np.abs(X), initial=0.0)
    if np.max(np.abs(X - X.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(X)


def as_spd(X: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Validate ``X`` as symmetric positive definite and return it symmetrized."""
    X = check_symmetric(X, name)
    try:
        np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from None
    return X


def is_spd(X: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(symmetrize(X))
    except np.linalg.LinAlgError:
        return False
    return True


def cholesky(X: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor ``G`` with ``G @ G.T == X``."""
    try:
        return np.linalg.cholesky(symmetrize(X))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix is not positive definite") from None


def spd_inverse(X: np.ndarray) -> np.ndarray:
    """Inverse of a positive-definite matrix through its Cholesky factor."""
    X = symmetrize(X)
    try:
        factor = scipy.linalg.cho_factor(X, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("matrix is singular or not positive definite") from None
    return symmetrize(scipy.linalg.cho_solve(factor, np.eye(X.shape[0])))


def min_eigenvalue(X: np.ndarray) -> np.ndarray:
    """Smallest eigenvalue of a symmetric matrix or of each matrix in a stack."""
    return np.linalg.eigvalsh(symmetrize(X))[..., 0]


def _check_pair(X: np.ndarray, Y: np.ndarray) -> None:
    if X.shape[-2:] != Y.shape[-2:]:
        raise ValueError(f"dimension mismatch: {X.shape[-2:]} vs {Y.shape[-2:]}")


def loewner_leq(X: np.ndarray, Y: np.ndarray, tol: float | None = None) -> bool:
    """True iff ``Y - X`` is positive semidefinite (up to ``tol``)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    _check_pair(X, Y)
    if tol is None:
        tol = 1e-9 * (1.0 + max(np.max(np.abs(X)), np.max(np.abs(Y))))
    return bool(min_eigenvalue(Y - X) >= -tol)


@dataclass(frozen=True)
class CovarianceConstraintSet:
    """The Loewner interval ``{X : lower <= X <= upper}``.

    ``lower`` must be positive definite so that every member is bounded
    away from singularity.
    """

    lower: np.ndarray
    upper: np.ndarray
    tol: float = field(init=False, repr=False)

    def __post_init__(self):
        lower = as_spd(self.lower, "lower bound")
        upper = as_spd(self.upper, "upper bound")
        _check_pair(lower, upper)
        tol = 1e-9 * (1.0 + np.max(np.abs(upper)))
        if min_eigenvalue(upper - lower) < -tol:
            raise ValueError("lower bound is not below upper bound in Loewner order")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "tol", tol)

    @classmethod
    def scaled(cls, nominal: np.ndarray, low: float, high: float) -> CovarianceConstraintSet:
        """The set ``{low * nominal <= X <= high * nominal}``."""
        nominal = np.asarray(nominal, dtype=float)
        return cls(low * nominal, high * nominal)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, X: np.ndarray) -> bool | np.ndarray:
        """Membership test; accepts one matrix or a stack ``(..., d, d)``."""
        X = np.asarray(X, dtype=float)
        if X.shape[-2:] != (self.dim, self.dim):
            raise ValueError(f"expected trailing shape {(self.dim, self.dim)}, got {X.shape}")
        inside = (min_eigenvalue(X - self.lower) >= -self.tol) & (
            min_eigenvalue(self.upper - X) >= -self.tol
        )
        return bool(inside) if X.ndim == 2 else inside
