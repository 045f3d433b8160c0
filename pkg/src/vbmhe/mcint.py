"""Importance-sampling integrals of inverse-Wishart laws truncated to a set.

Given a target ``W^-1(S, v)`` restricted to a constraint set, the
estimators return self-normalized approximations of

    E[f(X) | X in set],    f(X) = X  or  f(X) = X^-1,

from ``J`` draws of a proposal inverse-Wishart.  Draws falling outside
the set get zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .invwishart import InverseWishart
from .psd import CovarianceConstraintSet, symmetrize


class ZeroWeightMass(RuntimeError):
    """No proposal draw carried positive weight inside the constraint set."""


@dataclass(frozen=True)
class ImportanceEstimate:
    value: np.ndarray
    effective_sample_size: float
    accepted_fraction: float
    # entrywise standard error (delta method for the ratio estimator)
    standard_error: np.ndarray


def self_normalized_mean(
    values: np.ndarray, log_weights: np.ndarray, accepted: np.ndarray
) -> ImportanceEstimate:
    """Weighted mean of ``values[accepted]`` with weights ``exp(log_weights)``.

    Log-weights are shifted by their maximum before exponentiation, so any
    constant offset cancels.
    """
    accepted = np.asarray(accepted, dtype=bool)
    n = len(log_weights)
    if not accepted.any():
        raise ZeroWeightMass("no sample fell inside the constraint set")
    lw = np.where(accepted, log_weights, -np.inf)
    peak = np.max(lw)
    if not np.isfinite(peak):
        raise ZeroWeightMass("all importance weights underflowed")
    w = np.exp(lw - peak)
    total = w.sum()
    w /= total
    value = symmetrize(np.einsum("j,j...->...", w, values))
    ess = 1.0 / np.sum(w**2)
    centered = values - value
    se = np.sqrt(np.einsum("j,j...->...", w**2, centered**2))
    return ImportanceEstimate(
        value=value,
        effective_sample_size=float(ess),
        accepted_fraction=float(accepted.sum() / n),
        standard_error=se,
    )


def _estimate(
    target: InverseWishart,
    constraint: CovarianceConstraintSet,
    proposal: InverseWishart,
    J: int,
    rng: np.random.Generator,
    inverse: bool,
) -> ImportanceEstimate:
    if J < 1:
        raise ValueError(f"number of samples must be >= 1, got {J}")
    if not target.dim == proposal.dim == constraint.dim:
        raise ValueError("target, proposal and constraint set dimensions differ")
    X, X_inv, logdet = proposal.sample_with_inverse(rng, J)
    log_w = target.log_density_from_inverse(X_inv, logdet) - proposal.log_density_from_inverse(
        X_inv, logdet
    )
    accepted = constraint.contains(X)
    return self_normalized_mean(X_inv if inverse else X, log_w, accepted)


def constrained_mean(
    target: InverseWishart,
    constraint: CovarianceConstraintSet,
    proposal: InverseWishart,
    J: int,
    rng: np.random.Generator,
) -> ImportanceEstimate:
    """Estimate ``E[X | X in constraint]`` for ``X ~ target``."""
    return _estimate(target, constraint, proposal, J, rng, inverse=False)


def constrained_mean_of_inverse(
    target: InverseWishart,
    constraint: CovarianceConstraintSet,
    proposal: InverseWishart,
    J: int,
    rng: np.random.Generator,
) -> ImportanceEstimate:
    """Estimate ``E[X^-1 | X in constraint]`` for ``X ~ target``."""
    return _estimate(target, constraint, proposal, J, rng, inverse=True)


def centered_proposal(previous: np.ndarray, dof: float) -> InverseWishart:
    """Inverse-Wishart with ``dof`` degrees of freedom whose mean is ``previous``."""
    previous = np.asarray(previous, dtype=float)
    d = previous.shape[0]
    if not dof > d + 1:
        raise ValueError(f"proposal degrees of freedom {dof} must exceed d + 1 = {d + 1}")
    return InverseWishart((dof - d - 1) * previous, dof)


def default_proposal_Q(prev_Q_hat: np.ndarray, m_t: float, n_x: int) -> InverseWishart:
    if np.shape(prev_Q_hat) != (n_x, n_x):
        raise ValueError("previous process-noise estimate has the wrong shape")
    return centered_proposal(prev_Q_hat, m_t)


def default_proposal_R(prev_R_hat: np.ndarray, s_t: float, n_y: int) -> InverseWishart:
    if np.shape(prev_R_hat) != (n_y, n_y):
        raise ValueError("previous measurement-noise estimate has the wrong shape")
    return centered_proposal(prev_R_hat, s_t)
