"""Linear-Gaussian state-space models and synthetic scenarios.

    x_i = A x_{i-1} + w_{i-1},   w ~ N(0, Q)
    y_i = C x_i + v_i,           v ~ N(0, R)

Trajectories are generated with ``numpy``'s PCG64 bit generator seeded
from the scenario seed, so a seed reproduces the same trajectory on any
platform with the same numpy release.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .psd import check_symmetric, symmetrize


class DetectabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LinearGaussianModel:
    A: np.ndarray
    C: np.ndarray
    check_detectability: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        C = np.array(self.C, dtype=float, ndmin=2)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if C.ndim != 2 or C.shape[1] != A.shape[0]:
            raise ValueError(f"C must have {A.shape[0]} columns, got shape {C.shape}")
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)
        if self.check_detectability and not is_detectable(A, C):
            warnings.warn(
                "(A, C) failed the detectability test; stability guarantees do not apply",
                DetectabilityWarning,
                stacklevel=3,
            )

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_y(self) -> int:
        return self.C.shape[0]


def is_detectable(A: np.ndarray, C: np.ndarray, tol: float = 1e-9) -> bool:
    """PBH test: every mode with ``|lambda| >= 1`` must be observable."""
    n = A.shape[0]
    for lam in np.linalg.eigvals(A):
        if abs(lam) < 1.0 - tol:
            continue
        pencil = np.vstack([lam * np.eye(n) - A, C.astype(complex)])
        if np.linalg.matrix_rank(pencil, tol=tol * max(1.0, np.linalg.norm(A))) < n:
            return False
    return True


def constant_velocity_model(sampling_interval: float = 1.0) -> LinearGaussianModel:
    """Planar constant-velocity target, state ``(px, py, vx, vy)``, position measured."""
    if not sampling_interval > 0:
        raise ValueError(f"sampling interval must be positive, got {sampling_interval}")
    I2 = np.eye(2)
    A = np.block([[I2, sampling_interval * I2], [np.zeros((2, 2)), I2]])
    C = np.hstack([I2, np.zeros((2, 2))])
    return LinearGaussianModel(A, C)


# Nominal covariances of the planar tracking benchmark.
TRACKING_Q0 = np.array(
    [
        [1 / 3, 0, 1 / 2, 0],
        [0, 1 / 3, 0, 1 / 2],
        [1 / 2, 0, 1, 0],
        [0, 1 / 2, 0, 1],
    ]
)
TRACKING_R0 = 100.0 * np.array([[1.0, 0.5], [0.5, 1.0]])
TRACKING_X0 = np.array([0.0, 10.0, 0.0, 10.0])
TRACKING_P0 = np.diag([100.0, 100.0, 100.0, 100.0])


@dataclass(frozen=True)
class Scenario:
    model: LinearGaussianModel
    true_Q: np.ndarray
    true_R: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    horizon: int
    seed: int

    def __post_init__(self):
        n_x, n_y = self.model.n_x, self.model.n_y
        for name, size in (("true_Q", n_x), ("true_R", n_y), ("x0_cov", n_x)):
            X = check_symmetric(getattr(self, name), name)
            if X.shape != (size, size):
                raise ValueError(f"{name} must be {size}x{size}, got {X.shape}")
            if np.linalg.eigvalsh(X)[0] < -1e-12 * (1 + np.abs(X).max()):
                raise ValueError(f"{name} is not positive semidefinite")
            object.__setattr__(self, name, X)
        x0 = np.asarray(self.x0_mean, dtype=float).reshape(-1)
        if x0.shape != (n_x,):
            raise ValueError(f"x0_mean must have length {n_x}")
        object.__setattr__(self, "x0_mean", x0)
        if int(self.horizon) < 1:
            raise ValueError("horizon must be a positive integer")
        object.__setattr__(self, "horizon", int(self.horizon))
        seed = int(self.seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "seed", seed)

    @classmethod
    def tracking(
        cls,
        seed: int,
        horizon: int = 500,
        q_scale: float = 50.0,
        r_scale: float = 3.0,
        sampling_interval: float = 1.0,
    ) -> Scenario:
        """The planar tracking benchmark with true noise ``(q_scale Q0, r_scale R0)``."""
        return cls(
            model=constant_velocity_model(sampling_interval),
            true_Q=q_scale * TRACKING_Q0,
            true_R=r_scale * TRACKING_R0,
            x0_mean=TRACKING_X0,
            x0_cov=TRACKING_P0,
            horizon=horizon,
            seed=seed,
        )

    def with_seed(self, seed: int) -> Scenario:
        return Scenario(
            self.model, self.true_Q, self.true_R, self.x0_mean, self.x0_cov, self.horizon, seed
        )


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (horizon + 1, n_x): x_0 .. x_t
    measurements: np.ndarray  # (horizon, n_y): y_1 .. y_t

    @property
    def horizon(self) -> int:
        return len(self.measurements)


def gaussian_factor(cov: np.ndarray) -> np.ndarray:
    """A matrix ``F`` with ``F F^T = cov``; tolerates semidefinite input."""
    cov = symmetrize(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        eigval, eigvec = np.linalg.eigh(cov)
        return eigvec * np.sqrt(np.clip(eigval, 0.0, None))


def simulate(scenario: Scenario) -> Trajectory:
    model = scenario.model
    n_x, n_y, steps = model.n_x, model.n_y, scenario.horizon
    rng = np.random.default_rng(scenario.seed)
    x0 = scenario.x0_mean + gaussian_factor(scenario.x0_cov) @ rng.standard_normal(n_x)
    w = rng.standard_normal((steps, n_x)) @ gaussian_factor(scenario.true_Q).T
    v = rng.standard_normal((steps, n_y)) @ gaussian_factor(scenario.true_R).T

    states = np.empty((steps + 1, n_x))
    states[0] = x0
    A = model.A
    for i in range(1, steps + 1):
        states[i] = A @ states[i - 1] + w[i - 1]
    measurements = states[1:] @ model.C.T + v
    return Trajectory(states, measurements)
