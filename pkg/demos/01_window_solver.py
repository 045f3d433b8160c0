# Window posterior of a linear-Gaussian model, solved two ways.
import numpy as np

from vbmhe.baselines import KalmanState, rts_smoother
from vbmhe.model import LinearGaussianModel, constant_velocity_model, TRACKING_Q0, TRACKING_R0
from vbmhe.window import PrecisionPair, WindowInputs, assemble_omega, solve_window

# Scalar random walk, one measurement y = 1, prior N(0, 1), unit noise.
scalar = LinearGaussianModel([[1.0]], [[1.0]])
inputs = WindowInputs(scalar, [[1.0]], [0.0], [[1.0]])
unit = PrecisionPair(np.eye(1), np.eye(1))
print(assemble_omega(inputs, unit))  # [[2, -1], [-1, 2]]

post = solve_window(inputs, unit)
# Blocks are stored newest first: index 0 is x_1, index 1 is x_0.
print(post.means.ravel())  # [2/3, 1/3]
print(post.diag_blocks.ravel(), post.offdiag_blocks.ravel())

# Same thing on the tracking model with an 8-step window.
model = constant_velocity_model(1.0)
rng = np.random.default_rng(0)
ys = rng.normal(scale=10.0, size=(8, 2))
x0, P0 = np.zeros(4), 100 * np.eye(4)
post = solve_window(
    WindowInputs(model, ys, x0, P0),
    PrecisionPair(np.linalg.inv(TRACKING_Q0), np.linalg.inv(TRACKING_R0)),
)

# The fixed-interval smoother gives identical moments (chronological order there).
ref = rts_smoother(model, TRACKING_Q0, TRACKING_R0, KalmanState(x0, P0), ys)
print(np.abs(post.means[::-1] - ref.means).max())
print(np.abs(post.diag_blocks[::-1] - ref.covs).max())
print(np.abs(post.offdiag_blocks[::-1] - ref.cross).max())
