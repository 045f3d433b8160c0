import numpy as np
import pytest
from scipy import stats

from vbmhe.invwishart import InverseWishart
from vbmhe.mcint import (
    ZeroWeightMass,
    centered_proposal,
    constrained_mean,
    constrained_mean_of_inverse,
    default_proposal_Q,
    default_proposal_R,
    self_normalized_mean,
)
from vbmhe.model import TRACKING_Q0
from vbmhe.psd import CovarianceConstraintSet, loewner_leq

from conftest import random_spd

TARGET_1D = InverseWishart(np.array([[2.0]]), 5.0)
SET_1D = CovarianceConstraintSet(np.array([[1.0]]), np.array([[3.0]]))


def _rejection_oracle(n=400_000, seed=0):
    x = stats.invwishart(df=5.0, scale=2.0).rvs(n, random_state=np.random.default_rng(seed))
    kept = x[(x >= 1.0) & (x <= 3.0)]
    return kept.mean(), (1.0 / kept).mean()


def test_constrained_mean_matches_rejection_oracle():
    mean_ref, inv_ref = _rejection_oracle()
    est = constrained_mean(TARGET_1D, SET_1D, TARGET_1D, 100_000, np.random.default_rng(1))
    assert est.value[0, 0] == pytest.approx(mean_ref, rel=0.02)
    est_inv = constrained_mean_of_inverse(TARGET_1D, SET_1D, TARGET_1D, 100_000, np.random.default_rng(2))
    assert est_inv.value[0, 0] == pytest.approx(inv_ref, rel=0.02)


def test_unconstrained_limit_recovers_closed_forms(rng):
    S = random_spd(rng, 3)
    target = InverseWishart(S, 9.0)
    wide = CovarianceConstraintSet(1e-9 * np.eye(3), 1e9 * np.eye(3))
    est = constrained_mean(target, wide, target, 10_000, np.random.default_rng(5))
    assert est.accepted_fraction == 1.0
    assert np.all(np.abs(est.value - target.mean()) < 3 * est.standard_error + 1e-12)
    est = constrained_mean_of_inverse(target, wide, target, 10_000, np.random.default_rng(6))
    assert np.all(np.abs(est.value - target.mean_of_inverse()) < 3 * est.standard_error + 1e-12)
    # proposal equals target: weights are uniform
    assert est.effective_sample_size == pytest.approx(10_000)


def test_single_sample_is_returned_exactly():
    rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(7)
    wide = CovarianceConstraintSet(1e-9 * np.eye(2), 1e9 * np.eye(2))
    target = InverseWishart(np.eye(2), 6.0)
    proposal = InverseWishart(2 * np.eye(2), 5.0)
    est = constrained_mean(target, wide, proposal, 1, rng_a)
    np.testing.assert_array_equal(est.value, proposal.sample(rng_b, 1)[0])
    assert est.effective_sample_size == 1.0


def test_inverse_mean_lies_in_inverted_interval():
    target = InverseWishart(3 * TRACKING_Q0, 8.0)
    cset = CovarianceConstraintSet.scaled(TRACKING_Q0, 0.3, 3.0)
    est = constrained_mean_of_inverse(target, cset, target, 2000, np.random.default_rng(8))
    assert loewner_leq(np.linalg.inv(cset.upper), est.value)
    assert loewner_leq(est.value, np.linalg.inv(cset.lower))
    est = constrained_mean(target, cset, target, 2000, np.random.default_rng(8))
    assert cset.contains(est.value)


def test_weight_offset_cancels(rng):
    values = rng.standard_normal((50, 2, 2))
    values = values + np.swapaxes(values, 1, 2)
    lw = rng.standard_normal(50)
    acc = rng.random(50) < 0.7
    a = self_normalized_mean(values, lw, acc)
    b = self_normalized_mean(values, lw + 1234.5, acc)
    np.testing.assert_allclose(a.value, b.value, rtol=0, atol=1e-12)
    assert 0 < a.effective_sample_size <= 50
    assert 0 <= a.accepted_fraction <= 1


def test_zero_weight_mass():
    far = CovarianceConstraintSet(np.array([[1e6]]), np.array([[2e6]]))
    with pytest.raises(ZeroWeightMass):
        constrained_mean(TARGET_1D, far, TARGET_1D, 100, np.random.default_rng(0))


def test_convergence_between_sample_sizes():
    a = constrained_mean(TARGET_1D, SET_1D, TARGET_1D, 100_000, np.random.default_rng(10))
    b = constrained_mean(TARGET_1D, SET_1D, TARGET_1D, 400_000, np.random.default_rng(11))
    assert abs(a.value - b.value)[0, 0] < 3 * a.standard_error[0, 0]


def test_determinism():
    a = constrained_mean(TARGET_1D, SET_1D, TARGET_1D, 500, np.random.default_rng(3))
    b = constrained_mean(TARGET_1D, SET_1D, TARGET_1D, 500, np.random.default_rng(3))
    np.testing.assert_array_equal(a.value, b.value)


def test_default_proposals():
    Q = TRACKING_Q0
    p = default_proposal_Q(Q, 13.0, 4)
    np.testing.assert_allclose(p.scale, 8 * Q)
    np.testing.assert_allclose(p.mean(), Q, rtol=1e-14)
    np.testing.assert_allclose(default_proposal_Q(Q, 9.0, 4).scale, 4 * Q)
    R = np.array([[2.0, 0.1], [0.1, 1.0]])
    np.testing.assert_allclose(default_proposal_R(R, 6.0, 2).mean(), R, rtol=1e-14)
    with pytest.raises(ValueError):
        centered_proposal(Q, 5.0)
    with pytest.raises(ValueError):
        default_proposal_Q(R, 9.0, 4)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        constrained_mean(TARGET_1D, CovarianceConstraintSet(np.eye(2), 2 * np.eye(2)), TARGET_1D, 10,
                         np.random.default_rng(0))
