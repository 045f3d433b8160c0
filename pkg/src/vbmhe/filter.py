"""Variational-Bayes moving-horizon filter with constrained noise covariances.

The unknown process and measurement noise covariances ``Q`` and ``R`` get
inverse-Wishart priors truncated to Loewner intervals.  At every step a
window of the last ``T`` measurements is processed by ``N`` variational
sweeps alternating between

* the Gaussian trajectory posterior for fixed ``Phi = E[Q^-1]``,
  ``Psi = E[R^-1]`` (see :mod:`vbmhe.window`), and
* truncated inverse-Wishart factors for ``Q`` and ``R`` whose moments are
  computed by importance sampling (see :mod:`vbmhe.mcint`).

Once the window is full, the oldest state is moved forward with one
Kalman step using the current estimates ``Q_hat``, ``R_hat`` and the
inverse-Wishart statistics are decayed by the forgetting factor ``rho``.
Before the window fills, the window simply grows from the time-0 priors.

Random draws are consumed in a fixed order (per sweep: Phi then Psi;
after the sweeps: Q_hat then R_hat), which makes runs reproducible from a
single seeded generator.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import KalmanState, kf_predict, kf_update
from .invwishart import InverseWishart
from .mcint import (
    ZeroWeightMass,
    constrained_mean,
    constrained_mean_of_inverse,
    default_proposal_Q,
    default_proposal_R,
)
from .model import TRACKING_Q0, TRACKING_R0, LinearGaussianModel
from .psd import CovarianceConstraintSet, as_spd, spd_inverse, symmetrize
from .window import PrecisionPair, WindowInputs, WindowPosterior, assemble_omega, assemble_omega_vec, solve_window


@dataclass(frozen=True)
class Hyperparams:
    T: int
    N: int
    J: int
    rho: float
    Q_prior: InverseWishart
    R_prior: InverseWishart
    Q_set: CovarianceConstraintSet
    R_set: CovarianceConstraintSet

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("window length T must be >= 1")
        if self.N < 1:
            raise ValueError("number of variational iterations N must be >= 1")
        if self.J < 1:
            raise ValueError("number of importance samples J must be >= 1")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("forgetting factor rho must lie in (0, 1)")
        self.Q_prior.require_finite_mean()
        self.R_prior.require_finite_mean()
        if self.Q_prior.dim != self.Q_set.dim or self.R_prior.dim != self.R_set.dim:
            raise ValueError("prior and constraint set dimensions differ")

    @classmethod
    def tracking(
        cls,
        T: int,
        N: int = 1,
        J: int = 100,
        rho: float = 0.9,
        kappa: float = 3.0,
        tau: float = 3.0,
    ) -> Hyperparams:
        """Settings of the planar tracking benchmark around the nominal ``Q0``, ``R0``."""
        n_x, n_y = TRACKING_Q0.shape[0], TRACKING_R0.shape[0]
        return cls(
            T=T,
            N=N,
            J=J,
            rho=rho,
            Q_prior=InverseWishart(tau * TRACKING_Q0, tau + n_x + 1),
            R_prior=InverseWishart(kappa * TRACKING_R0, kappa + n_y + 1),
            Q_set=CovarianceConstraintSet.scaled(TRACKING_Q0, 1e-3, 1e3),
            R_set=CovarianceConstraintSet.scaled(TRACKING_R0, 0.1, 10.0),
        )


@dataclass(frozen=True)
class FilterState:
    """Everything carried from one step to the next.

    ``window`` holds the measurements not yet absorbed into the Gaussian
    window prior ``(prior_mean, prior_cov)``; in steady state it holds
    ``T - 1`` of them between steps.
    """

    window: tuple[np.ndarray, ...]
    prior_mean: np.ndarray
    prior_cov: np.ndarray
    Q_wishart: InverseWishart
    R_wishart: InverseWishart
    Phi: np.ndarray
    Psi: np.ndarray
    Q_hat: np.ndarray
    R_hat: np.ndarray
    t: int = 0


@dataclass(frozen=True)
class Diagnostics:
    iterations: int
    ess_Phi: tuple[float, ...] = ()
    ess_Psi: tuple[float, ...] = ()
    ess_Q: float = float("nan")
    ess_R: float = float("nan")
    # names of integrals that had no weight mass and held the previous value
    fallbacks: tuple[str, ...] = ()


@dataclass(frozen=True)
class VariationalResult:
    posterior: WindowPosterior
    M: np.ndarray
    S: np.ndarray
    m: float
    s: float
    Phi: np.ndarray
    Psi: np.ndarray
    Q_hat: np.ndarray
    R_hat: np.ndarray
    diagnostics: Diagnostics
    # Phi, Psi used to start the sweeps
    Phi_start: np.ndarray = field(repr=False, default=None)
    Psi_start: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class FilterOutput:
    state_estimate: np.ndarray
    state_cov: np.ndarray
    Q_hat: np.ndarray
    R_hat: np.ndarray
    diagnostics: Diagnostics


def _prior_estimates(model, hyper, rng):
    """Constrained prior moments: Phi, Psi, Q_hat, R_hat, plus fallback names."""
    fallbacks = []
    out = {}
    for key, prior, cset, inverse in (
        ("Phi", hyper.Q_prior, hyper.Q_set, True),
        ("Psi", hyper.R_prior, hyper.R_set, True),
        ("Q_hat", hyper.Q_prior, hyper.Q_set, False),
        ("R_hat", hyper.R_prior, hyper.R_set, False),
    ):
        estimator = constrained_mean_of_inverse if inverse else constrained_mean
        try:
            out[key] = estimator(prior, cset, prior, hyper.J, rng).value
        except ZeroWeightMass:
            fallbacks.append(key)
            mean = prior.mean()
            out[key] = spd_inverse(mean) if inverse else mean
    return out, tuple(fallbacks)


def init(
    model: LinearGaussianModel,
    hyper: Hyperparams,
    x0_mean: np.ndarray,
    x0_cov: np.ndarray,
    rng: np.random.Generator,
) -> FilterState:
    """Initial filter state from the priors on ``x_0``, ``Q`` and ``R``."""
    if hyper.Q_prior.dim != model.n_x or hyper.R_prior.dim != model.n_y:
        raise ValueError("hyperparameter dimensions do not match the model")
    if not hyper.Q_set.contains(hyper.Q_prior.mean()):
        raise ValueError("process-noise prior mean lies outside its constraint set")
    if not hyper.R_set.contains(hyper.R_prior.mean()):
        raise ValueError("measurement-noise prior mean lies outside its constraint set")
    x0_mean = np.asarray(x0_mean, dtype=float).reshape(-1)
    if x0_mean.shape != (model.n_x,):
        raise ValueError(f"x0_mean must have length {model.n_x}")
    x0_cov = as_spd(x0_cov, "x0_cov")
    est, _ = _prior_estimates(model, hyper, rng)
    return FilterState(
        window=(),
        prior_mean=x0_mean,
        prior_cov=x0_cov,
        Q_wishart=hyper.Q_prior,
        R_wishart=hyper.R_prior,
        Phi=est["Phi"],
        Psi=est["Psi"],
        Q_hat=est["Q_hat"],
        R_hat=est["R_hat"],
        t=0,
    )


def noise_statistics(
    model: LinearGaussianModel,
    posterior: WindowPosterior,
    measurements: np.ndarray,
    M_prior: np.ndarray,
    S_prior: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior scale matrices for ``Q`` and ``R`` over the window.

    Sums run over the ``T`` transitions / measurements inside the window.
    """
    A, C = model.A, model.C
    x = posterior.means
    P = posterior.diag_blocks
    P_cross = posterior.offdiag_blocks  # Cov(x_i, x_{i-1}), newest first
    T = posterior.T

    newer, older = x[:T], x[1:]
    resid = newer - older @ A.T
    M = M_prior + resid.T @ resid
    AP = A @ P[1:]
    APA = AP @ A.T
    cross_term = P_cross @ A.T
    M = M + np.sum(P[:T] + APA - cross_term - np.swapaxes(cross_term, -1, -2), axis=0)

    ys = np.asarray(measurements, dtype=float)[::-1]
    meas_resid = ys - newer @ C.T
    S = S_prior + meas_resid.T @ meas_resid + np.sum(C @ P[:T] @ C.T, axis=0)
    return symmetrize(M), symmetrize(S)


def _integrate(estimator, target, cset, proposal, J, rng, previous, name, fallbacks):
    try:
        est = estimator(target, cset, proposal, J, rng)
    except ZeroWeightMass:
        fallbacks.append(name)
        return previous, float("nan")
    return est.value, est.effective_sample_size


def variational_iterations(
    state: FilterState,
    model: LinearGaussianModel,
    hyper: Hyperparams,
    rng: np.random.Generator,
) -> VariationalResult:
    """Run ``N`` variational sweeps over the current window.

    The window may hold fewer than ``T`` measurements during warm-up.
    """
    L = len(state.window)
    if not 1 <= L <= hyper.T:
        raise ValueError(f"window must hold 1..{hyper.T} measurements, has {L}")
    n_x, n_y = model.n_x, model.n_y
    m = state.Q_wishart.dof + L
    s = state.R_wishart.dof + L
    prop_Q = default_proposal_Q(state.Q_hat, m, n_x)
    prop_R = default_proposal_R(state.R_hat, s, n_y)
    inputs = WindowInputs(model, np.array(state.window), state.prior_mean, state.prior_cov)

    Phi, Psi = state.Phi, state.Psi
    fallbacks: list[str] = []
    ess_Phi, ess_Psi = [], []
    for k in range(1, hyper.N + 1):
        posterior = solve_window(inputs, PrecisionPair(Phi, Psi))
        M, S = noise_statistics(model, posterior, inputs.measurements, state.Q_wishart.scale, state.R_wishart.scale)
        target_Q = InverseWishart(M, m)
        target_R = InverseWishart(S, s)
        Phi, e_phi = _integrate(
            constrained_mean_of_inverse, target_Q, hyper.Q_set, prop_Q, hyper.J, rng, Phi, f"Phi[{k}]", fallbacks
        )
        Psi, e_psi = _integrate(
            constrained_mean_of_inverse, target_R, hyper.R_set, prop_R, hyper.J, rng, Psi, f"Psi[{k}]", fallbacks
        )
        ess_Phi.append(e_phi)
        ess_Psi.append(e_psi)

    Q_hat, ess_Q = _integrate(constrained_mean, target_Q, hyper.Q_set, prop_Q, hyper.J, rng, state.Q_hat, "Q_hat", fallbacks)
    R_hat, ess_R = _integrate(constrained_mean, target_R, hyper.R_set, prop_R, hyper.J, rng, state.R_hat, "R_hat", fallbacks)
    diag = Diagnostics(
        iterations=hyper.N,
        ess_Phi=tuple(ess_Phi),
        ess_Psi=tuple(ess_Psi),
        ess_Q=ess_Q,
        ess_R=ess_R,
        fallbacks=tuple(fallbacks),
    )
    return VariationalResult(
        posterior=posterior,
        M=M,
        S=S,
        m=m,
        s=s,
        Phi=Phi,
        Psi=Psi,
        Q_hat=Q_hat,
        R_hat=R_hat,
        diagnostics=diag,
        Phi_start=state.Phi,
        Psi_start=state.Psi,
    )


def time_update(
    state: FilterState,
    result: VariationalResult,
    model: LinearGaussianModel,
    hyper: Hyperparams,
    next_measurement: np.ndarray | None = None,
) -> FilterState:
    """Move the window prior forward by one step and slide the window.

    The oldest window state goes through one Kalman step with ``Q_hat``,
    ``R_hat`` and the oldest window measurement; the inverse-Wishart
    statistics are decayed by ``rho``.
    """
    if len(state.window) != hyper.T:
        raise ValueError("time update needs a full window")
    n_x, n_y, rho = model.n_x, model.n_y, hyper.rho
    predicted = kf_predict(KalmanState(state.prior_mean, state.prior_cov), model, result.Q_hat)
    updated, _ = kf_update(predicted, model, result.R_hat, state.window[0])

    window = state.window[1:]
    if next_measurement is not None:
        window = window + (np.asarray(next_measurement, dtype=float),)
    return FilterState(
        window=window,
        prior_mean=updated.mean,
        prior_cov=updated.cov,
        Q_wishart=InverseWishart(rho * result.M, rho * (result.m - n_x - 1) + n_x + 1),
        R_wishart=InverseWishart(rho * result.S, rho * (result.s - n_y - 1) + n_y + 1),
        Phi=result.Phi,
        Psi=result.Psi,
        Q_hat=result.Q_hat,
        R_hat=result.R_hat,
        t=state.t,
    )


def step(
    state: FilterState,
    model: LinearGaussianModel,
    hyper: Hyperparams,
    y: np.ndarray,
    rng: np.random.Generator,
) -> tuple[FilterState, FilterOutput]:
    """Ingest ``y_t`` and return the new state and the filtered estimate."""
    y = np.asarray(y, dtype=float).reshape(model.n_y)
    if len(state.window) >= hyper.T:
        raise ValueError("window already full; the previous step did not slide it")
    current = replace(state, window=state.window + (y,), t=state.t + 1)
    result = variational_iterations(current, model, hyper, rng)
    output = FilterOutput(
        state_estimate=result.posterior.newest_mean,
        state_cov=result.posterior.newest_cov,
        Q_hat=result.Q_hat,
        R_hat=result.R_hat,
        diagnostics=result.diagnostics,
    )
    if len(current.window) == hyper.T:
        new_state = time_update(current, result, model, hyper)
    else:
        new_state = replace(current, Phi=result.Phi, Psi=result.Psi, Q_hat=result.Q_hat, R_hat=result.R_hat)
    return new_state, output


class VBMHEFilter:
    """Stateful convenience wrapper around :func:`init` and :func:`step`.

    >>> f = VBMHEFilter(model, Hyperparams.tracking(T=20), x0, P0, seed=1)
    >>> out = f.step(y)            # doctest: +SKIP
    """

    def __init__(self, model, hyper, x0_mean, x0_cov, seed=None, rng=None):
        if rng is None:
            if seed is None:
                raise ValueError("pass a seed or a numpy Generator")
            rng = np.random.default_rng(seed)
        self.model = model
        self.hyper = hyper
        self.rng = rng
        self.state = init(model, hyper, x0_mean, x0_cov, rng)

    def step(self, y) -> FilterOutput:
        self.state, output = step(self.state, self.model, self.hyper, y, self.rng)
        return output

    def run(self, measurements) -> list[FilterOutput]:
        return [self.step(y) for y in measurements]


def full_information_solve(
    model: LinearGaussianModel,
    hyper: Hyperparams,
    measurements: np.ndarray,
    x0_mean: np.ndarray,
    x0_cov: np.ndarray,
    rng: np.random.Generator,
) -> tuple[WindowPosterior, np.ndarray, np.ndarray]:
    """Fixed-point VB over the whole record ``y_1 .. y_t`` with dense algebra.

    Meant for short records; memory grows as ``(t n_x)^2``.  Uses the
    same random-draw order as the moving-horizon filter, so with ``T = t``
    one filter step from :func:`init` reproduces this result.
    """
    ys = np.asarray(measurements, dtype=float).reshape(-1, model.n_y)
    t = len(ys)
    if t < 1:
        raise ValueError("need at least one measurement")
    n, A, C = model.n_x, model.A, model.C
    state = init(model, hyper, x0_mean, x0_cov, rng)
    m = hyper.Q_prior.dof + t
    s = hyper.R_prior.dof + t
    prop_Q = default_proposal_Q(state.Q_hat, m, n)
    prop_R = default_proposal_R(state.R_hat, s, model.n_y)
    inputs = WindowInputs(model, ys, x0_mean, x0_cov)

    # rows i = 1..t of the difference operators, on the newest-first stacking
    dim = (t + 1) * n
    D = np.zeros((t, n, dim))
    H = np.zeros((t, model.n_y, dim))
    for i in range(1, t + 1):
        k = t - i
        D[i - 1][:, k * n : (k + 1) * n] = np.eye(n)
        D[i - 1][:, (k + 1) * n : (k + 2) * n] = -A
        H[i - 1][:, k * n : (k + 1) * n] = C

    Phi, Psi = state.Phi, state.Psi
    for _ in range(hyper.N):
        prec = PrecisionPair(Phi, Psi)
        P = spd_inverse(assemble_omega(inputs, prec))
        x = P @ assemble_omega_vec(inputs, Psi)
        Dx = D @ x
        M = hyper.Q_prior.scale + np.einsum("ia,ib->ab", Dx, Dx) + np.sum(D @ P @ np.swapaxes(D, 1, 2), axis=0)
        r = ys - H @ x
        S = hyper.R_prior.scale + r.T @ r + np.sum(H @ P @ np.swapaxes(H, 1, 2), axis=0)
        M, S = symmetrize(M), symmetrize(S)
        try:
            Phi = constrained_mean_of_inverse(InverseWishart(M, m), hyper.Q_set, prop_Q, hyper.J, rng).value
        except ZeroWeightMass:
            pass
        try:
            Psi = constrained_mean_of_inverse(InverseWishart(S, s), hyper.R_set, prop_R, hyper.J, rng).value
        except ZeroWeightMass:
            pass

    Q_hat, R_hat = state.Q_hat, state.R_hat
    try:
        Q_hat = constrained_mean(InverseWishart(M, m), hyper.Q_set, prop_Q, hyper.J, rng).value
    except ZeroWeightMass:
        pass
    try:
        R_hat = constrained_mean(InverseWishart(S, s), hyper.R_set, prop_R, hyper.J, rng).value
    except ZeroWeightMass:
        pass

    blocks = x.reshape(t + 1, n)
    diag = np.stack([P[k * n : (k + 1) * n, k * n : (k + 1) * n] for k in range(t + 1)])
    cross = np.stack([P[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] for k in range(t)])
    return WindowPosterior(blocks, diag, cross), Q_hat, R_hat
