"""Monte-Carlo trials and RMSE / ARMSE metrics for tracking benchmarks.

Errors are pooled per component group: at each time step

    RMSE_t = sqrt( mean over trials and over the group's axes of e^2 )

and ARMSE is the time average of ``RMSE_t``.  Warm-up steps are included.

Seeds are derived from the master seed by ``numpy.random.SeedSequence``
spawn keys: trial ``i`` simulates with key ``(i, 0)`` and the ``k``-th
configured filter draws from key ``(i, k + 1)``.  Results therefore do not
depend on how trials are distributed over worker processes.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .baselines import NominalKalmanFilter
from .filter import Hyperparams, VBMHEFilter
from .model import TRACKING_Q0, TRACKING_R0, Scenario, simulate


@dataclass(frozen=True)
class NominalKFConfig:
    name: str
    Q: np.ndarray
    R: np.ndarray
    kind = "nominal-kf"

    @property
    def T(self) -> int | None:
        return None


@dataclass(frozen=True)
class VBMHEConfig:
    name: str
    hyper: Hyperparams
    kind = "vb-mhe"

    @property
    def T(self) -> int:
        return self.hyper.T


FilterConfig = Union[NominalKFConfig, VBMHEConfig]


@dataclass
class TrialResult:
    """Per-step squared errors of one filter on one trial.

    ``sq_err_pos[t]`` is the squared position error averaged over the
    position axes; likewise for velocity.
    """

    trial: int
    filter_name: str
    T: int | None
    sq_err_pos: np.ndarray
    sq_err_vel: np.ndarray
    q_trace: np.ndarray
    r_trace: np.ndarray
    fallbacks: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class ArmseRow:
    filter_name: str
    T: int | None
    armse_pos: float
    armse_vel: float
    trials: int
    failed: int


@dataclass
class BenchmarkReport:
    rows: list[ArmseRow]
    rmse_pos: dict[tuple[str, int | None], np.ndarray]
    rmse_vel: dict[tuple[str, int | None], np.ndarray]
    trial_count: int
    master_seed: int
    trial_seeds: list[int]
    failures: list[tuple[int, str, str]] = field(default_factory=list)

    def row(self, name: str, T: int | None = None) -> ArmseRow:
        for r in self.rows:
            if r.filter_name == name and r.T == T:
                return r
        raise KeyError((name, T))

    def armse_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["filter", "T", "armse_pos", "armse_vel", "trials", "failed"])
        for r in self.rows:
            w.writerow([r.filter_name, _fmt_T(r.T), repr(r.armse_pos), repr(r.armse_vel), r.trials, r.failed])
        return buf.getvalue()

    def rmse_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "filter", "T", "rmse_pos", "rmse_vel"])
        for key, pos in self.rmse_pos.items():
            vel = self.rmse_vel[key]
            for t, (p, v) in enumerate(zip(pos, vel), start=1):
                w.writerow([t, key[0], _fmt_T(key[1]), repr(float(p)), repr(float(v))])
        return buf.getvalue()

    def table(self) -> str:
        header = f"{'filter':<16}{'T':>5}{'ARMSE pos':>12}{'ARMSE vel':>12}{'trials':>8}{'failed':>8}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.filter_name:<16}{_fmt_T(r.T) or '-':>5}{r.armse_pos:>12.2f}{r.armse_vel:>12.2f}"
                f"{r.trials:>8}{r.failed:>8}"
            )
        return "\n".join(lines)

    def write(self, out_dir: str | Path, metadata: dict | None = None) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "armse.csv").write_text(self.armse_csv())
        (out / "rmse.csv").write_text(self.rmse_csv())
        meta = {
            "trial_count": self.trial_count,
            "master_seed": self.master_seed,
            "trial_seeds": self.trial_seeds,
            "failures": [list(f) for f in self.failures],
        }
        if metadata:
            meta.update(metadata)
        (out / "report.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _fmt_T(T: int | None) -> str:
    return "" if T is None else str(T)


def armse(sq_errors: np.ndarray) -> float:
    """Time-averaged RMSE of a ``(trials, time)`` table of squared errors."""
    sq = np.asarray(sq_errors, dtype=float)
    if sq.size == 0:
        raise ValueError("armse of an empty table")
    sq = sq.reshape(-1, sq.shape[-1]) if sq.ndim > 1 else sq.reshape(1, -1)
    return float(np.mean(np.sqrt(np.mean(sq, axis=0))))


def trial_seed(master_seed: int, trial: int) -> int:
    seq = np.random.SeedSequence(master_seed, spawn_key=(trial, 0))
    return int(seq.generate_state(1, np.uint64)[0])


def filter_rng(master_seed: int, trial: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial, index + 1)))


def run_filter(
    config: FilterConfig,
    scenario: Scenario,
    states: np.ndarray,
    measurements: np.ndarray,
    rng: np.random.Generator,
    position_dims: Sequence[int] = (0, 1),
    velocity_dims: Sequence[int] = (2, 3),
) -> TrialResult:
    """Run one configured filter over a trajectory and collect errors."""
    steps = len(measurements)
    estimates = np.empty((steps, scenario.model.n_x))
    q_trace = np.empty(steps)
    r_trace = np.empty(steps)
    fallbacks = 0
    if isinstance(config, NominalKFConfig):
        kf = NominalKalmanFilter(scenario.model, config.Q, config.R, scenario.x0_mean, scenario.x0_cov)
        for i, y in enumerate(measurements):
            estimates[i] = kf.step(y).mean
        q_trace[:] = np.trace(config.Q)
        r_trace[:] = np.trace(config.R)
    else:
        vb = VBMHEFilter(scenario.model, config.hyper, scenario.x0_mean, scenario.x0_cov, rng=rng)
        for i, y in enumerate(measurements):
            out = vb.step(y)
            estimates[i] = out.state_estimate
            q_trace[i] = np.trace(out.Q_hat)
            r_trace[i] = np.trace(out.R_hat)
            fallbacks += len(out.diagnostics.fallbacks)
    err = estimates - states[1:]
    return TrialResult(
        trial=-1,
        filter_name=config.name,
        T=config.T,
        sq_err_pos=np.mean(err[:, list(position_dims)] ** 2, axis=1),
        sq_err_vel=np.mean(err[:, list(velocity_dims)] ** 2, axis=1),
        q_trace=q_trace,
        r_trace=r_trace,
        fallbacks=fallbacks,
    )


def run_trial(
    scenario: Scenario,
    configs: Sequence[FilterConfig],
    trial: int,
    master_seed: int,
    position_dims: Sequence[int] = (0, 1),
    velocity_dims: Sequence[int] = (2, 3),
) -> list[TrialResult]:
    """One trial: a fresh trajectory and every configured filter run on it."""
    sc = scenario.with_seed(trial_seed(master_seed, trial))
    traj = simulate(sc)
    results = []
    for k, config in enumerate(configs):
        try:
            res = run_filter(
                config, sc, traj.states, traj.measurements, filter_rng(master_seed, trial, k),
                position_dims, velocity_dims,
            )
        except Exception as exc:  # recorded and excluded, never silently
            empty = np.full(sc.horizon, np.nan)
            res = TrialResult(-1, config.name, config.T, empty, empty, empty, empty,
                              error=f"{type(exc).__name__}: {exc}")
        res.trial = trial
        results.append(res)
    return results


def _run_trial_args(args):
    return run_trial(*args)


def run_trials(
    scenario: Scenario,
    configs: Sequence[FilterConfig],
    trial_count: int,
    master_seed: int,
    jobs: int = 1,
    position_dims: Sequence[int] = (0, 1),
    velocity_dims: Sequence[int] = (2, 3),
) -> BenchmarkReport:
    if trial_count < 1:
        raise ValueError("trial_count must be >= 1")
    if not configs:
        raise ValueError("at least one filter configuration is required")
    keys = [(c.name, c.T) for c in configs]
    if len(set(keys)) != len(keys):
        raise ValueError("filter (name, T) pairs must be unique")
    tasks = [
        (scenario, list(configs), i, master_seed, tuple(position_dims), tuple(velocity_dims))
        for i in range(trial_count)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            per_trial = list(pool.map(_run_trial_args, tasks))
    else:
        per_trial = [_run_trial_args(t) for t in tasks]

    rows, rmse_pos, rmse_vel, failures = [], {}, {}, []
    for k, key in enumerate(keys):
        results = [trial_results[k] for trial_results in per_trial]
        ok = [r for r in results if not r.failed]
        failures.extend((r.trial, r.filter_name, r.error) for r in results if r.failed)
        if ok:
            sq_pos = np.array([r.sq_err_pos for r in ok])
            sq_vel = np.array([r.sq_err_vel for r in ok])
            rmse_pos[key] = np.sqrt(sq_pos.mean(axis=0))
            rmse_vel[key] = np.sqrt(sq_vel.mean(axis=0))
            a_pos, a_vel = armse(sq_pos), armse(sq_vel)
        else:
            rmse_pos[key] = rmse_vel[key] = np.full(scenario.horizon, np.nan)
            a_pos = a_vel = float("nan")
        rows.append(ArmseRow(key[0], key[1], a_pos, a_vel, len(ok), len(results) - len(ok)))
    return BenchmarkReport(
        rows=rows,
        rmse_pos=rmse_pos,
        rmse_vel=rmse_vel,
        trial_count=trial_count,
        master_seed=master_seed,
        trial_seeds=[trial_seed(master_seed, i) for i in range(trial_count)],
        failures=failures,
    )


def tracking_filters(
    windows: Sequence[int] = (4, 20), N: int = 1, J: int = 100, rho: float = 0.9
) -> list[FilterConfig]:
    """Nominal KF plus one VB-MHE per window length, benchmark settings."""
    configs: list[FilterConfig] = [NominalKFConfig("NKF", TRACKING_Q0, TRACKING_R0)]
    configs += [VBMHEConfig("VB-MHE", Hyperparams.tracking(T=T, N=N, J=J, rho=rho)) for T in windows]
    return configs
