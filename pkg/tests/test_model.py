import numpy as np
import pytest

from vbmhe.model import (
    TRACKING_Q0,
    TRACKING_R0,
    DetectabilityWarning,
    LinearGaussianModel,
    Scenario,
    constant_velocity_model,
    is_detectable,
    simulate,
)


def test_constant_velocity_model():
    m = constant_velocity_model(1.0)
    np.testing.assert_array_equal(m.A[0], [1, 0, 1, 0])
    assert constant_velocity_model(0.5).A[0, 2] == 0.5
    for dt in (0.1, 1.0, 3.0):
        np.testing.assert_array_equal(constant_velocity_model(dt).C, np.hstack([np.eye(2), np.zeros((2, 2))]))
    with pytest.raises(ValueError):
        constant_velocity_model(0.0)


def test_model_is_read_only_and_checked():
    m = constant_velocity_model()
    with pytest.raises(ValueError):
        m.A[0, 0] = 2.0
    with pytest.raises(ValueError):
        LinearGaussianModel(np.eye(2), np.ones((1, 3)))


def test_detectability_warning():
    # unstable unobserved mode
    A = np.diag([1.0, 2.0])
    C = np.array([[1.0, 0.0]])
    assert not is_detectable(A, C)
    with pytest.warns(DetectabilityWarning):
        LinearGaussianModel(A, C)
    # stable unobserved mode is fine
    assert is_detectable(np.diag([1.0, 0.5]), C)


def _zero_noise(model, m, horizon=10):
    z = np.zeros((model.n_x, model.n_x))
    return Scenario(model, z, np.zeros((model.n_y, model.n_y)), m, z, horizon, seed=3)


def test_zero_noise_identity():
    model = LinearGaussianModel(np.eye(3), np.array([[1.0, 2.0, 0.0]]), check_detectability=False)
    m = np.array([1.0, -2.0, 0.5])
    traj = simulate(_zero_noise(model, m))
    assert np.all(traj.states == m)
    np.testing.assert_allclose(traj.measurements, np.tile(model.C @ m, (10, 1)))


def test_scalar_identity_propagation():
    model = LinearGaussianModel([[1.0]], [[1.0]])
    traj = simulate(_zero_noise(model, [2.0], horizon=7))
    assert traj.states.shape == (8, 1) and traj.measurements.shape == (7, 1)
    assert np.all(traj.states == 2.0) and np.all(traj.measurements == 2.0)


def test_increment_covariance_matches_truth():
    sc = Scenario.tracking(seed=11, horizon=100_000)
    traj = simulate(sc)
    inc = traj.states[1:] - traj.states[:-1] @ sc.model.A.T
    emp = inc.T @ inc / len(inc)
    Q = 50 * TRACKING_Q0
    nz = Q != 0
    np.testing.assert_allclose(emp[nz], Q[nz], rtol=0.05)
    assert np.all(np.abs(emp[~nz]) < 0.05 * np.abs(Q).max())


def test_simulate_is_deterministic():
    sc = Scenario.tracking(seed=5, horizon=50)
    a, b = simulate(sc), simulate(sc)
    assert np.array_equal(a.states, b.states) and np.array_equal(a.measurements, b.measurements)
    c = simulate(sc.with_seed(6))
    assert not np.array_equal(a.measurements, c.measurements)


def test_scenario_validation():
    with pytest.raises(ValueError):
        Scenario.tracking(seed=-1)
    with pytest.raises(ValueError):
        Scenario.tracking(seed=1, horizon=0)
    m = constant_velocity_model()
    with pytest.raises(ValueError):
        Scenario(m, -TRACKING_Q0, TRACKING_R0, np.zeros(4), np.eye(4), 5, 1)
