# One tracking run: nominal Kalman filter vs VB-MHE when the noise is mis-specified.
import numpy as np

from vbmhe import Hyperparams, NominalKalmanFilter, Scenario, VBMHEFilter, simulate
from vbmhe.model import TRACKING_Q0, TRACKING_R0

# Truth: 50x the nominal process noise and 3x the nominal measurement noise.
scenario = Scenario.tracking(seed=3, horizon=500)
traj = simulate(scenario)
print(traj.states.shape, traj.measurements.shape)  # (501, 4) (500, 2)

nkf = NominalKalmanFilter(scenario.model, TRACKING_Q0, TRACKING_R0, scenario.x0_mean, scenario.x0_cov)
vb = VBMHEFilter(scenario.model, Hyperparams.tracking(T=20), scenario.x0_mean, scenario.x0_cov, seed=4)

nkf_est, vb_est, q_ratio, r_ratio = [], [], [], []
for y in traj.measurements:
    nkf_est.append(nkf.step(y).mean)
    out = vb.step(y)
    vb_est.append(out.state_estimate)
    q_ratio.append(np.trace(out.Q_hat) / np.trace(TRACKING_Q0))
    r_ratio.append(np.trace(out.R_hat) / np.trace(TRACKING_R0))

truth = traj.states[1:]
for name, est in (("NKF", nkf_est), ("VB-MHE", vb_est)):
    err = np.asarray(est) - truth
    print(name, "position RMS", np.sqrt(np.mean(err[:, :2] ** 2)), "velocity RMS", np.sqrt(np.mean(err[:, 2:] ** 2)))

# The estimated noise levels move from the nominal values toward 50 and 3.
for t in (1, 10, 50, 100, 250, 500):
    print(t, round(q_ratio[t - 1], 1), round(r_ratio[t - 1], 2))
