"""Gaussian trajectory posterior over a window of ``T`` measurements.

For fixed precisions ``Phi = E[Q^-1]`` and ``Psi = E[R^-1]`` the window
posterior over ``x_{t-T} .. x_t`` is ``N(Omega^-1 omega, Omega^-1)`` with a
block-tridiagonal information matrix ``Omega``.

Block ordering is NEWEST FIRST throughout this module: block ``0`` is
time ``t``, block ``T`` is the oldest state ``t - T`` carrying the window
prior.  Measurements are passed chronologically (``y_{t-T+1} .. y_t``), so
block ``k < T`` pairs with ``measurements[T - 1 - k]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .model import LinearGaussianModel
from .psd import NotPositiveDefiniteError, as_spd, spd_inverse, symmetrize


class PrecisionPair(NamedTuple):
    Phi: np.ndarray
    Psi: np.ndarray


@dataclass(frozen=True)
class WindowInputs:
    model: LinearGaussianModel
    measurements: np.ndarray  # (T, n_y), oldest first
    prior_mean: np.ndarray
    prior_cov: np.ndarray

    def __post_init__(self):
        model = self.model
        ys = np.asarray(self.measurements, dtype=float).reshape(-1, model.n_y)
        if len(ys) < 1:
            raise ValueError("window needs at least one measurement")
        mean = np.asarray(self.prior_mean, dtype=float).reshape(-1)
        if mean.shape != (model.n_x,):
            raise ValueError(f"prior mean must have length {model.n_x}")
        cov = as_spd(self.prior_cov, "window prior covariance")
        if cov.shape != (model.n_x, model.n_x):
            raise ValueError("window prior covariance has the wrong shape")
        object.__setattr__(self, "measurements", ys)
        object.__setattr__(self, "prior_mean", mean)
        object.__setattr__(self, "prior_cov", cov)

    @property
    def T(self) -> int:
        return len(self.measurements)


@dataclass(frozen=True)
class WindowPosterior:
    """Means and the block-diagonal / first off-diagonal of the covariance.

    ``means[k]`` and ``diag_blocks[k]`` refer to time ``t - k``;
    ``offdiag_blocks[k]`` is ``Cov(x_{t-k}, x_{t-k-1})``, i.e. the block in
    row ``k``, column ``k + 1`` of ``Omega^-1``.
    """

    means: np.ndarray  # (T + 1, n_x)
    diag_blocks: np.ndarray  # (T + 1, n_x, n_x)
    offdiag_blocks: np.ndarray  # (T, n_x, n_x)

    @property
    def T(self) -> int:
        return len(self.offdiag_blocks)

    @property
    def newest_mean(self) -> np.ndarray:
        return self.means[0]

    @property
    def newest_cov(self) -> np.ndarray:
        return self.diag_blocks[0]


def _check_precisions(model: LinearGaussianModel, prec: PrecisionPair) -> None:
    if np.shape(prec.Phi) != (model.n_x, model.n_x):
        raise ValueError("Phi has the wrong shape")
    if np.shape(prec.Psi) != (model.n_y, model.n_y):
        raise ValueError("Psi has the wrong shape")


def assemble_blocks(
    inputs: WindowInputs, prec: PrecisionPair
) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal blocks ``(T+1, n, n)`` and super-diagonal blocks ``(T, n, n)`` of Omega."""
    model = inputs.model
    _check_precisions(model, prec)
    A, C = model.A, model.C
    Phi, Psi = prec.Phi, prec.Psi
    T = inputs.T

    meas_info = C.T @ Psi @ C
    trans_info = A.T @ Phi @ A
    diag = np.empty((T + 1, model.n_x, model.n_x))
    diag[0] = meas_info + Phi
    diag[1:T] = meas_info + Phi + trans_info
    # the oldest state has no measurement inside the window
    diag[T] = trans_info + spd_inverse(inputs.prior_cov)
    upper = np.broadcast_to(-Phi @ A, (T, model.n_x, model.n_x))
    return symmetrize(diag), upper


def assemble_omega(inputs: WindowInputs, prec: PrecisionPair) -> np.ndarray:
    """Dense ``(T+1) n_x`` square information matrix (newest block first)."""
    diag, upper = assemble_blocks(inputs, prec)
    n = inputs.model.n_x
    T = inputs.T
    omega = np.zeros(((T + 1) * n, (T + 1) * n))
    for k in range(T + 1):
        omega[k * n : (k + 1) * n, k * n : (k + 1) * n] = diag[k]
    for k in range(T):
        omega[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] = upper[k]
        omega[(k + 1) * n : (k + 2) * n, k * n : (k + 1) * n] = upper[k].T
    return omega


def assemble_omega_vec(inputs: WindowInputs, Psi: np.ndarray) -> np.ndarray:
    """Stacked information vector: ``C' Psi y_t, ..., C' Psi y_{t-T+1}, P^-1 x``."""
    model = inputs.model
    if np.shape(Psi) != (model.n_y, model.n_y):
        raise ValueError("Psi has the wrong shape")
    newest_first = inputs.measurements[::-1]
    blocks = newest_first @ (model.C.T @ Psi).T
    prior_block = spd_inverse(inputs.prior_cov) @ inputs.prior_mean
    return np.concatenate([blocks.reshape(-1), prior_block])


def _cho(S: np.ndarray):
    try:
        return scipy.linalg.cho_factor(S, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(
            "window information matrix is not positive definite"
        ) from None


def solve_window(inputs: WindowInputs, prec: PrecisionPair) -> WindowPosterior:
    """Posterior means and selected covariance blocks via block Cholesky.

    Forward sweep computes the Schur complements ``S_k``; the backward
    sweep recovers the mean and, by the usual selected-inversion
    recursion, the diagonal and first off-diagonal blocks of ``Omega^-1``.
    Cost is ``O(T n_x^3)``.
    """
    diag, upper = assemble_blocks(inputs, prec)
    rhs = assemble_omega_vec(inputs, prec.Psi).reshape(inputs.T + 1, -1)
    T = inputs.T
    n = inputs.model.n_x
    eye = np.eye(n)

    factors = []
    gains = np.empty((T, n, n))  # F_k = S_k^-1 E_k^T, with E_k = upper[k]^T
    z = np.empty_like(rhs)
    S = diag[0]
    z[0] = rhs[0]
    for k in range(T):
        f = _cho(S)
        factors.append(f)
        gains[k] = scipy.linalg.cho_solve(f, upper[k], check_finite=False)
        S = diag[k + 1] - upper[k].T @ gains[k]
        z[k + 1] = rhs[k + 1] - gains[k].T @ z[k]
    factors.append(_cho(symmetrize(S)))

    means = np.empty_like(rhs)
    cov = np.empty((T + 1, n, n))
    cross = np.empty((T, n, n))
    means[T] = scipy.linalg.cho_solve(factors[T], z[T], check_finite=False)
    cov[T] = scipy.linalg.cho_solve(factors[T], eye, check_finite=False)
    for k in range(T - 1, -1, -1):
        S_inv = scipy.linalg.cho_solve(factors[k], eye, check_finite=False)
        means[k] = S_inv @ z[k] - gains[k] @ means[k + 1]
        cross[k] = -gains[k] @ cov[k + 1]
        cov[k] = S_inv + gains[k] @ cov[k + 1] @ gains[k].T
    return WindowPosterior(means, symmetrize(cov), cross)


def solve_window_dense(inputs: WindowInputs, prec: PrecisionPair) -> tuple[np.ndarray, np.ndarray]:
    """Dense reference: full mean vector and full covariance ``Omega^-1``."""
    omega = assemble_omega(inputs, prec)
    P = spd_inverse(omega)
    return P @ assemble_omega_vec(inputs, prec.Psi), P
