"""Command-line front end: ``vbmhe simulate | run | bench``.

Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or
arguments, 3 filter failure (the message gives the step index).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import sys

import numpy as np

from .config import ConfigError, load_config
from .experiment import VBMHEConfig, run_trials
from .baselines import NominalKalmanFilter
from .filter import VBMHEFilter
from .model import Scenario, Trajectory, simulate

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_FILTER = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _load(path: str):
    try:
        return load_config(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read config {path}: {exc.strerror or exc}") from None
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"invalid config {path}:\n{exc}") from None


def _scenario(cfg, seed) -> Scenario:
    try:
        return cfg.build_scenario(seed)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


def _filters(cfg, model):
    try:
        return cfg.build_filters(model)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None


@contextlib.contextmanager
def _open_output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {path}: {exc.strerror or exc}") from None
    with fh:
        yield fh


def _num(x) -> str:
    return repr(float(x))


def write_trajectory_csv(fh, traj: Trajectory) -> None:
    """Columns ``t, x1..xn, y1..ym``; row ``t = 0`` has no measurement."""
    n_x, n_y = traj.states.shape[1], traj.measurements.shape[1]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(n_x)] + [f"y{j + 1}" for j in range(n_y)])
    for t, x in enumerate(traj.states):
        y = [""] * n_y if t == 0 else [_num(v) for v in traj.measurements[t - 1]]
        w.writerow([t] + [_num(v) for v in x] + y)


def read_trajectory_csv(path: str, n_x: int, n_y: int) -> tuple[np.ndarray | None, np.ndarray]:
    """Measurements (and states, if present) from a ``simulate`` CSV.

    Only the ``y`` columns are required; rows with empty ``y`` are skipped.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read data {path}: {exc.strerror or exc}") from None
    y_cols = [f"y{j + 1}" for j in range(n_y)]
    x_cols = [f"x{i + 1}" for i in range(n_x)]
    if not rows or any(c not in rows[0] for c in y_cols):
        raise CliError(EXIT_CONFIG, f"{path}: expected columns {', '.join(y_cols)}")
    try:
        ys = np.array([[float(r[c]) for c in y_cols] for r in rows if r[y_cols[0]] != ""])
        xs = None
        if all(c in rows[0] for c in x_cols):
            xs = np.array([[float(r[c]) for c in x_cols] for r in rows])
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"{path}: {exc}") from None
    if len(ys) == 0:
        raise CliError(EXIT_CONFIG, f"{path}: no measurement rows")
    return xs, ys


def cmd_simulate(args) -> int:
    cfg = _load(args.config)
    scenario = _scenario(cfg, args.seed)
    traj = simulate(scenario)
    with _open_output(args.output) as fh:
        write_trajectory_csv(fh, traj)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.data is not None:
        try:
            model_cfg = cfg.build_scenario(args.seed if args.seed is not None else 0)
        except ConfigError as exc:
            raise CliError(EXIT_CONFIG, str(exc)) from None
        model = model_cfg.model
        _, measurements = read_trajectory_csv(args.data, model.n_x, model.n_y)
        x0_mean, x0_cov = model_cfg.x0_mean, model_cfg.x0_cov
    else:
        scenario = _scenario(cfg, args.seed)
        model = scenario.model
        measurements = simulate(scenario).measurements
        x0_mean, x0_cov = scenario.x0_mean, scenario.x0_cov
    configs = _filters(cfg, model)
    if len(configs) != 1:
        raise CliError(EXIT_CONFIG, f"filter: run needs exactly one filter, the config defines {len(configs)}")
    config = configs[0]
    if isinstance(config, VBMHEConfig):
        if args.seed is None and cfg.scenario.seed is None:
            raise CliError(EXIT_CONFIG, "scenario.seed: no seed configured and none given on the command line")
        seed = args.seed if args.seed is not None else cfg.scenario.seed
        # the filter's draws use a stream separate from the simulation
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0, 1)))
        filt = VBMHEFilter(model, config.hyper, x0_mean, x0_cov, rng=rng)
    else:
        filt = None
        kf = NominalKalmanFilter(model, config.Q, config.R, x0_mean, x0_cov)

    n_x = model.n_x
    header = (["t"] + [f"xhat{i + 1}" for i in range(n_x)]
              + ["cov_trace", "trace_Q", "trace_R", "iterations", "ess_Q", "ess_R", "fallbacks"])
    with _open_output(args.output) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for t, y in enumerate(measurements, start=1):
            try:
                if filt is not None:
                    out = filt.step(y)
                    mean, cov, Q, R = out.state_estimate, out.state_cov, out.Q_hat, out.R_hat
                    d = out.diagnostics
                    extra = [d.iterations, _num(d.ess_Q), _num(d.ess_R), ";".join(d.fallbacks)]
                else:
                    st = kf.step(y)
                    mean, cov, Q, R = st.mean, st.cov, kf.Q, kf.R
                    extra = [0, "", "", ""]
            except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
                raise CliError(EXIT_FILTER, f"filter failed at step {t}: {exc}") from None
            w.writerow([t] + [_num(v) for v in mean]
                       + [_num(np.trace(cov)), _num(np.trace(Q)), _num(np.trace(R))] + extra)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _load(args.config)
    scenario = _scenario(cfg, args.seed)
    configs = _filters(cfg, scenario.model)
    trials = args.trials if args.trials is not None else cfg.experiment.trials
    if trials < 1:
        raise CliError(EXIT_CONFIG, "--trials must be >= 1")
    if args.jobs < 1:
        raise CliError(EXIT_CONFIG, "--jobs must be >= 1")
    out_dir = args.output or cfg.experiment.output
    if out_dir is None:
        raise CliError(EXIT_CONFIG, "experiment.output: no output directory configured or given")
    # the scenario seed acts as the master seed for all trials
    report = run_trials(scenario, configs, trials, scenario.seed, jobs=args.jobs)
    try:
        report.write(out_dir, metadata={"config": cfg.model_dump(mode="json")})
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write to {out_dir}: {exc.strerror or exc}") from None
    print(report.table())
    for trial, name, error in report.failures:
        print(f"trial {trial} {name}: {error}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vbmhe", description="Adaptive moving-horizon estimation experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, output_help):
        p.add_argument("--config", required=True, help="TOML configuration file")
        p.add_argument("--output", help=output_help)
        p.add_argument("--seed", type=int, help="override the configured seed")

    p = sub.add_parser("simulate", help="write a simulated trajectory as CSV")
    common(p, "CSV path (default: standard output)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="run one filter and write per-step output as CSV")
    common(p, "CSV path (default: standard output)")
    p.add_argument("--data", help="measurements CSV from 'simulate' (default: simulate inline)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="Monte-Carlo benchmark over all configured filters")
    common(p, "output directory (default: experiment.output)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--trials", type=int, help="override experiment.trials")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CliError as exc:
        print(f"vbmhe: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
