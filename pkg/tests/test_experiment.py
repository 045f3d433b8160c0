import math

import numpy as np
import pytest

from vbmhe.experiment import NominalKFConfig, armse, run_trials, tracking_filters, trial_seed
from vbmhe.model import TRACKING_Q0, TRACKING_R0, Scenario, constant_velocity_model


def test_armse_examples():
    assert armse(np.zeros((3, 4))) == 0.0
    assert armse(np.full((2, 5), 7.0)) == pytest.approx(math.sqrt(7.0))
    # columns are time steps, rows are trials
    table = np.array([[1.0, 4.0], [9.0, 16.0]])
    assert armse(table) == pytest.approx((math.sqrt(5) + math.sqrt(10)) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        armse(np.zeros((0, 0)))


def test_zero_noise_error_decays():
    model = constant_velocity_model()
    sc = Scenario(model, np.zeros((4, 4)), np.zeros((2, 2)), np.zeros(4), 100 * np.eye(4), horizon=200, seed=0)
    cfg = NominalKFConfig("KF", 1e-12 * np.eye(4), 1e-2 * np.eye(2))
    rep = run_trials(sc, [cfg], trial_count=1, master_seed=0)
    pos, vel = rep.rmse_pos[("KF", None)], rep.rmse_vel[("KF", None)]
    assert pos[-1] < 0.05 * pos[0] and vel[-1] < 1e-6 * vel[0]


def test_report_structure_and_determinism():
    sc = Scenario.tracking(seed=0, horizon=30)
    configs = tracking_filters(windows=(2, 5), J=20)
    a = run_trials(sc, configs, trial_count=3, master_seed=11)
    b = run_trials(sc, configs, trial_count=3, master_seed=11)
    assert a.armse_csv() == b.armse_csv() and a.rmse_csv() == b.rmse_csv()
    assert [(r.filter_name, r.T) for r in a.rows] == [("NKF", None), ("VB-MHE", 2), ("VB-MHE", 5)]
    assert all(r.armse_pos >= 0 and r.trials == 3 and r.failed == 0 for r in a.rows)
    lines = a.rmse_csv().splitlines()
    assert lines[0] == "time,filter,T,rmse_pos,rmse_vel"
    assert len(lines) == 1 + 3 * 30
    assert a.trial_seeds == [trial_seed(11, i) for i in range(3)]
    c = run_trials(sc, configs, trial_count=3, master_seed=12)
    assert c.armse_csv() != a.armse_csv()


def test_parallel_matches_serial():
    sc = Scenario.tracking(seed=0, horizon=20)
    configs = tracking_filters(windows=(3,), J=10)
    a = run_trials(sc, configs, trial_count=3, master_seed=5, jobs=1)
    b = run_trials(sc, configs, trial_count=3, master_seed=5, jobs=2)
    assert a.armse_csv() == b.armse_csv() and a.rmse_csv() == b.rmse_csv()


def test_failures_are_counted_not_hidden():
    sc = Scenario.tracking(seed=0, horizon=10)
    # singular measurement-noise model: the innovation covariance cannot be inverted
    broken = NominalKFConfig("broken", np.zeros((4, 4)), np.zeros((2, 2)))
    sc_zero = Scenario(sc.model, sc.true_Q, sc.true_R, sc.x0_mean, np.zeros((4, 4)), 10, 0)
    ok = NominalKFConfig("NKF", TRACKING_Q0, TRACKING_R0)
    rep = run_trials(sc_zero, [ok, broken], trial_count=2, master_seed=0)
    row = rep.row("broken")
    assert row.failed == 2 and row.trials == 0 and math.isnan(row.armse_pos)
    assert rep.row("NKF").failed == 0
    assert len(rep.failures) == 2 and "NotPositiveDefinite" in rep.failures[0][2]


def test_writes_outputs(tmp_path):
    sc = Scenario.tracking(seed=0, horizon=5)
    rep = run_trials(sc, tracking_filters(windows=(2,), J=10), trial_count=1, master_seed=3)
    rep.write(tmp_path / "out", metadata={"note": "x"})
    assert (tmp_path / "out" / "armse.csv").read_text().startswith("filter,T,armse_pos")
    assert '"master_seed": 3' in (tmp_path / "out" / "report.json").read_text()
    assert "ARMSE pos" in rep.table()


def test_argument_validation():
    sc = Scenario.tracking(seed=0, horizon=5)
    with pytest.raises(ValueError):
        run_trials(sc, tracking_filters(), trial_count=0, master_seed=0)
    with pytest.raises(ValueError):
        run_trials(sc, [], trial_count=1, master_seed=0)
    cfg = tracking_filters(windows=(2,))
    with pytest.raises(ValueError):
        run_trials(sc, cfg + cfg[:1], trial_count=1, master_seed=0)
