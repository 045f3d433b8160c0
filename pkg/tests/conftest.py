import numpy as np
import pytest

from vbmhe.model import LinearGaussianModel

ACCEPTANCE_LINES: list[str] = []


def random_spd(rng, d, scale=1.0, floor=0.1):
    G = rng.standard_normal((d, d))
    return scale * (G @ G.T / d + floor * np.eye(d))


def random_model(rng, n_x, n_y):
    # stable-ish random dynamics; detectability is not needed for these checks
    A = rng.standard_normal((n_x, n_x))
    A *= rng.uniform(0.5, 1.1) / max(1e-9, np.max(np.abs(np.linalg.eigvals(A))))
    C = rng.standard_normal((n_y, n_x))
    return LinearGaussianModel(A, C, check_detectability=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def window_vs_rts(rng, T=None):
    """Max relative deviation of solve_window from the RTS smoother on a random case.

    Returns ``(mean_err, cov_err, cross_err)``.
    """
    from vbmhe.baselines import KalmanState, rts_smoother
    from vbmhe.window import PrecisionPair, WindowInputs, solve_window

    n_x = int(rng.integers(1, 5))
    n_y = int(rng.integers(1, 4))
    T = int(rng.integers(1, 9)) if T is None else T
    model = random_model(rng, n_x, n_y)
    Q, R, P0 = random_spd(rng, n_x), random_spd(rng, n_y), random_spd(rng, n_x, scale=3.0)
    x0 = rng.standard_normal(n_x)
    ys = 3 * rng.standard_normal((T, n_y))
    post = solve_window(WindowInputs(model, ys, x0, P0), PrecisionPair(np.linalg.inv(Q), np.linalg.inv(R)))
    ref = rts_smoother(model, Q, R, KalmanState(x0, P0), ys)

    def rel(a, b):
        return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))

    return (
        rel(post.means[::-1], ref.means),
        rel(post.diag_blocks[::-1], ref.covs),
        rel(post.offdiag_blocks[::-1], ref.cross),
    )
