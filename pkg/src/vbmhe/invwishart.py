"""Inverse-Wishart distribution over symmetric positive-definite matrices.

Density convention::

    p(X) = |S|^(v/2) / (2^(v d/2) Gamma_d(v/2)) |X|^(-(v+d+1)/2) exp(-tr(S X^-1)/2)

with scale ``S`` and degrees of freedom ``v``, so that ``E[X] = S/(v-d-1)``
and ``E[X^-1] = v S^-1``.  The degrees of freedom may be non-integer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import multigammaln

from .psd import NotPositiveDefiniteError, check_symmetric, spd_inverse, symmetrize


@dataclass(frozen=True)
class InverseWishart:
    """Inverse-Wishart law with ``scale`` matrix and ``dof`` degrees of freedom.

    Construction only requires ``dof > d - 1`` (a proper density); use
    :meth:`require_finite_mean` where the stricter ``dof > d + 1`` applies.
    """

    scale: np.ndarray
    dof: float
    _chol: np.ndarray = field(init=False, repr=False, compare=False)
    _log_norm: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        scale = check_symmetric(self.scale, "inverse-Wishart scale")
        d = scale.shape[0]
        dof = float(self.dof)
        if not dof > d - 1:
            raise ValueError(f"degrees of freedom {dof} must exceed d - 1 = {d - 1}")
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "dof", dof)
        object.__setattr__(self, "_chol", _robust_cholesky(scale))
        logdet_scale = 2.0 * np.sum(np.log(np.diag(self._chol)))
        log_norm = (
            0.5 * dof * logdet_scale
            - 0.5 * dof * d * np.log(2.0)
            - multigammaln(0.5 * dof, d)
        )
        object.__setattr__(self, "_log_norm", float(log_norm))

    @property
    def dim(self) -> int:
        return self.scale.shape[0]

    def require_finite_mean(self) -> InverseWishart:
        if not self.dof > self.dim + 1:
            raise ValueError(
                f"degrees of freedom {self.dof} must exceed d + 1 = {self.dim + 1}"
            )
        return self

    def mean(self) -> np.ndarray:
        self.require_finite_mean()
        return self.scale / (self.dof - self.dim - 1)

    def mean_of_inverse(self) -> np.ndarray:
        return self.dof * spd_inverse(self.scale)

    def log_density(self, X: np.ndarray) -> float | np.ndarray:
        """Normalized log-density at ``X`` (one matrix or a stack)."""
        X = symmetrize(X)
        try:
            chol = np.linalg.cholesky(X)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("density evaluated at a non-PD matrix") from None
        logdet = 2.0 * np.sum(np.log(np.diagonal(chol, axis1=-2, axis2=-1)), axis=-1)
        X_inv = np.linalg.inv(X)
        out = self.log_density_from_inverse(X_inv, logdet)
        return float(out) if np.ndim(out) == 0 else out

    def log_density_from_inverse(self, X_inv: np.ndarray, logdet: np.ndarray) -> np.ndarray:
        """Log-density given ``X^-1`` and ``log|X|``, avoiding a re-factorization."""
        trace_term = np.einsum("ij,...ij->...", self.scale, X_inv)
        return self._log_norm - 0.5 * (self.dof + self.dim + 1) * logdet - 0.5 * trace_term

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        X, _, _ = self.sample_with_inverse(rng, 1 if size is None else size)
        return X[0] if size is None else X

    def sample_with_inverse(
        self, rng: np.random.Generator, size: int
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw ``size`` samples; also return their inverses and log-determinants.

        Bartlett construction: ``Z = B B^T ~ Wishart(I, dof)`` with ``B`` lower
        triangular, ``B_ii^2 ~ chi2(dof - i)`` and standard normal entries below
        the diagonal.  With ``scale = G G^T`` the sample is ``X = G Z^-1 G^T``
        and ``X^-1 = G^-T Z G^-1`` needs no inversion of ``X``.
        """
        d = self.dim
        chi2 = rng.chisquare(self.dof - np.arange(d), size=(size, d))
        lower = rng.standard_normal((size, d, d))
        B = np.tril(lower, -1)
        B[:, np.arange(d), np.arange(d)] = np.sqrt(chi2)

        G = self._chol
        G_inv = np.linalg.inv(G)
        # H = G B^-T so X = H H^T; K = G^-T B so X^-1 = K K^T
        H = G @ np.swapaxes(np.linalg.inv(B), -1, -2)
        K = G_inv.T @ B
        X = symmetrize(H @ np.swapaxes(H, -1, -2))
        X_inv = symmetrize(K @ np.swapaxes(K, -1, -2))
        logdet = 2.0 * np.sum(np.log(np.diag(G))) - np.sum(np.log(chi2), axis=-1)
        return X, X_inv, logdet


def _robust_cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        d = S.shape[0]
        jitter = 1e-12 * np.trace(S) / d
        try:
            return np.linalg.cholesky(S + jitter * np.eye(d))
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("inverse-Wishart scale is not positive definite") from None
