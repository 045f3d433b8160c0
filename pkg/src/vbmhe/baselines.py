"""Nominal Kalman filter and fixed-interval Rauch-Tung-Striebel smoother."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LinearGaussianModel
from .psd import NotPositiveDefiniteError, spd_inverse, symmetrize


@dataclass(frozen=True)
class KalmanState:
    mean: np.ndarray
    cov: np.ndarray


def kf_predict(state: KalmanState, model: LinearGaussianModel, Q: np.ndarray) -> KalmanState:
    A = model.A
    return KalmanState(A @ state.mean, symmetrize(A @ state.cov @ A.T + Q))


def kf_update(
    prior: KalmanState, model: LinearGaussianModel, R: np.ndarray, y: np.ndarray
) -> tuple[KalmanState, np.ndarray]:
    """Measurement update with the Joseph-form covariance. Returns the gain too."""
    C = model.C
    P = prior.cov
    innovation_cov = C @ P @ C.T + R
    try:
        K = P @ C.T @ spd_inverse(innovation_cov)
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError("innovation covariance is singular") from None
    mean = prior.mean + K @ (np.asarray(y, dtype=float) - C @ prior.mean)
    I_KC = np.eye(model.n_x) - K @ C
    cov = I_KC @ P @ I_KC.T + K @ R @ K.T
    return KalmanState(mean, symmetrize(cov)), K


def kf_step(
    state: KalmanState,
    model: LinearGaussianModel,
    Q: np.ndarray,
    R: np.ndarray,
    y: np.ndarray,
) -> KalmanState:
    """One predict + update cycle of the Kalman filter."""
    posterior, _ = kf_update(kf_predict(state, model, Q), model, R, y)
    return posterior


class NominalKalmanFilter:
    """Kalman filter with fixed, possibly mis-specified, noise covariances."""

    def __init__(self, model, Q, R, x0_mean, x0_cov):
        self.model = model
        self.Q = np.asarray(Q, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.state = KalmanState(np.asarray(x0_mean, dtype=float), np.asarray(x0_cov, dtype=float))

    def step(self, y):
        self.state = kf_step(self.state, self.model, self.Q, self.R, y)
        return self.state


@dataclass(frozen=True)
class SmootherResult:
    """Smoothed quantities for times ``0 .. T`` in chronological order.

    ``cross[i]`` is ``Cov(x_{i+1}, x_i | y_{1:T})``.
    """

    means: np.ndarray  # (T + 1, n_x)
    covs: np.ndarray  # (T + 1, n_x, n_x)
    cross: np.ndarray  # (T, n_x, n_x)
    filtered_means: np.ndarray
    filtered_covs: np.ndarray


def rts_smoother(
    model: LinearGaussianModel,
    Q: np.ndarray,
    R: np.ndarray,
    prior: KalmanState,
    measurements: np.ndarray,
) -> SmootherResult:
    """Fixed-interval smoother for ``x_0 .. x_T`` given ``y_1 .. y_T``.

    ``prior`` is the distribution of ``x_0``, which carries no measurement.
    The lag-one cross-covariance uses the smoother gain
    ``G_i = P_{i|i} A' P_{i+1|i}^-1``: ``Cov(x_{i+1}, x_i) = P^s_{i+1} G_i'``.
    """
    ys = np.asarray(measurements, dtype=float).reshape(-1, model.n_y)
    T = len(ys)
    if T < 1:
        raise ValueError("smoother needs at least one measurement")
    A = model.A
    n = model.n_x

    f_means = np.empty((T + 1, n))
    f_covs = np.empty((T + 1, n, n))
    p_covs = np.empty((T + 1, n, n))
    f_means[0], f_covs[0] = prior.mean, prior.cov
    state = prior
    for i in range(1, T + 1):
        pred = kf_predict(state, model, Q)
        p_covs[i] = pred.cov
        state, _ = kf_update(pred, model, R, ys[i - 1])
        f_means[i], f_covs[i] = state.mean, state.cov

    means = f_means.copy()
    covs = f_covs.copy()
    cross = np.empty((T, n, n))
    for i in range(T - 1, -1, -1):
        G = f_covs[i] @ A.T @ spd_inverse(p_covs[i + 1])
        means[i] = f_means[i] + G @ (means[i + 1] - A @ f_means[i])
        covs[i] = symmetrize(f_covs[i] + G @ (covs[i + 1] - p_covs[i + 1]) @ G.T)
        cross[i] = covs[i + 1] @ G.T
    return SmootherResult(means, covs, cross, f_means, f_covs)
