"""Adaptive moving-horizon estimation with constrained inverse-Wishart noise priors."""

from .baselines import KalmanState, NominalKalmanFilter, kf_predict, kf_step, kf_update, rts_smoother
from .experiment import BenchmarkReport, NominalKFConfig, TrialResult, VBMHEConfig, armse, run_trials
from .filter import (
    FilterOutput,
    FilterState,
    Hyperparams,
    VBMHEFilter,
    full_information_solve,
    init,
    step,
    time_update,
    variational_iterations,
)
from .invwishart import InverseWishart
from .mcint import ImportanceEstimate, ZeroWeightMass, constrained_mean, constrained_mean_of_inverse
from .model import (
    DetectabilityWarning,
    LinearGaussianModel,
    Scenario,
    Trajectory,
    constant_velocity_model,
    simulate,
)
from .psd import CovarianceConstraintSet, NotPositiveDefiniteError
from .window import PrecisionPair, WindowInputs, WindowPosterior, solve_window

__version__ = "0.1.0"
