"""TOML run configuration shared by the command-line tool.

A configuration has four parts::

    schema_version = 1

    [scenario]                 # model, true noise, initial state
    seed = 7                   # optional; --seed overrides
    horizon = 500
    sampling_interval = 1.0    # constant-velocity model, or give A and C
    true_Q = [[...], ...]      # matrices are row-major nested arrays
    true_R = [[...], ...]
    x0_mean = [...]
    x0_cov = [[...], ...]

    [[filter]]                 # one or more
    type = "nominal-kf"
    name = "NKF"
    Q = [[...]]
    R = [[...]]

    [[filter]]
    type = "vb-mhe"
    name = "VB-MHE"
    T = [4, 20]                # one filter per window length
    N = 1
    J = 100
    rho = 0.9
    Q_prior = { scale = [[...]], dof = 8.0 }
    R_prior = { scale = [[...]], dof = 6.0 }
    Q_set = { lower = [[...]], upper = [[...]] }
    R_set = { lower = [[...]], upper = [[...]] }

    [experiment]
    trials = 20
    output = "bench-out"

Unknown keys are errors.  Problems are reported as :class:`ConfigError`
with the dotted key path of the offending entry.
"""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .experiment import FilterConfig, NominalKFConfig, VBMHEConfig
from .filter import Hyperparams
from .invwishart import InverseWishart
from .model import (
    TRACKING_P0,
    TRACKING_Q0,
    TRACKING_R0,
    TRACKING_X0,
    LinearGaussianModel,
    Scenario,
    constant_velocity_model,
)
from .psd import CovarianceConstraintSet

SCHEMA_VERSION = 1

Matrix = list[list[float]]


class ConfigError(ValueError):
    """Invalid configuration content; the message names the key."""


def _check_rectangular(value: Matrix) -> Matrix:
    if not value or any(len(row) != len(value[0]) for row in value):
        lengths = [len(row) for row in value]
        raise ValueError(f"matrix rows must have equal, nonzero length (row lengths {lengths})")
    return value


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PriorSection(_Strict):
    scale: Matrix
    dof: float

    _rect = field_validator("scale")(_check_rectangular)


class SetSection(_Strict):
    lower: Matrix
    upper: Matrix

    _rect = field_validator("lower", "upper")(_check_rectangular)


class ScenarioSection(_Strict):
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    horizon: int = Field(gt=0)
    sampling_interval: Optional[float] = Field(default=None, gt=0)
    A: Optional[Matrix] = None
    C: Optional[Matrix] = None
    true_Q: Matrix
    true_R: Matrix
    x0_mean: list[float]
    x0_cov: Matrix

    _rect = field_validator("A", "C", "true_Q", "true_R", "x0_cov")(
        lambda v: v if v is None else _check_rectangular(v)
    )

    @model_validator(mode="after")
    def _model_given_once(self):
        explicit = self.A is not None or self.C is not None
        if explicit and self.sampling_interval is not None:
            raise ValueError("give either sampling_interval or A and C, not both")
        if explicit and (self.A is None or self.C is None):
            raise ValueError("A and C must be given together")
        return self


class NominalKFSection(_Strict):
    type: Literal["nominal-kf"]
    name: str = "NKF"
    Q: Matrix
    R: Matrix

    _rect = field_validator("Q", "R")(_check_rectangular)


class VBMHESection(_Strict):
    type: Literal["vb-mhe"]
    name: str = "VB-MHE"
    T: Union[int, list[int]]
    N: int = Field(default=1, ge=1)
    J: int = Field(default=100, ge=1)
    rho: float = Field(default=0.9, gt=0, lt=1)
    Q_prior: PriorSection
    R_prior: PriorSection
    Q_set: SetSection
    R_set: SetSection

    @field_validator("T")
    @classmethod
    def _windows(cls, value):
        values = [value] if isinstance(value, int) else value
        if not values:
            raise ValueError("at least one window length is required")
        if any(v < 1 for v in values):
            raise ValueError("window lengths must be >= 1")
        if len(set(values)) != len(values):
            raise ValueError("window lengths must be distinct")
        return value

    @property
    def windows(self) -> list[int]:
        return [self.T] if isinstance(self.T, int) else list(self.T)


FilterSection = Annotated[Union[NominalKFSection, VBMHESection], Field(discriminator="type")]


class ExperimentSection(_Strict):
    trials: int = Field(default=20, ge=1)
    output: Optional[str] = None


class RunConfig(_Strict):
    schema_version: int
    scenario: ScenarioSection
    filter: list[FilterSection] = Field(default_factory=list)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)

    @field_validator("schema_version")
    @classmethod
    def _version(cls, value):
        if value != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {value}; this tool reads {SCHEMA_VERSION}")
        return value

    def build_scenario(self, seed: int | None = None) -> Scenario:
        """The scenario, with ``seed`` overriding the configured seed."""
        sc = self.scenario
        seed = sc.seed if seed is None else seed
        if seed is None:
            raise ConfigError("scenario.seed: no seed configured and none given on the command line")
        if sc.A is not None:
            model = _build(lambda: LinearGaussianModel(np.array(sc.A), np.array(sc.C)), "scenario.A")
        else:
            model = _build(lambda: constant_velocity_model(sc.sampling_interval or 1.0), "scenario.sampling_interval")
        n_x, n_y = model.n_x, model.n_y
        for key, shape in (("true_Q", (n_x, n_x)), ("true_R", (n_y, n_y)), ("x0_cov", (n_x, n_x))):
            _require_shape(getattr(sc, key), shape, f"scenario.{key}")
        if len(sc.x0_mean) != n_x:
            raise ConfigError(f"scenario.x0_mean: expected length {n_x}, got {len(sc.x0_mean)}")
        return _build(
            lambda: Scenario(
                model=model,
                true_Q=np.array(sc.true_Q),
                true_R=np.array(sc.true_R),
                x0_mean=np.array(sc.x0_mean),
                x0_cov=np.array(sc.x0_cov),
                horizon=sc.horizon,
                seed=seed,
            ),
            "scenario",
        )

    def build_filters(self, model: LinearGaussianModel) -> list[FilterConfig]:
        """One filter configuration per nominal KF and per VB-MHE window length."""
        if not self.filter:
            raise ConfigError("filter: at least one [[filter]] section is required")
        n_x, n_y = model.n_x, model.n_y
        configs: list[FilterConfig] = []
        for i, section in enumerate(self.filter):
            where = f"filter[{i}]"
            if isinstance(section, NominalKFSection):
                _require_shape(section.Q, (n_x, n_x), f"{where}.Q")
                _require_shape(section.R, (n_y, n_y), f"{where}.R")
                configs.append(NominalKFConfig(section.name, np.array(section.Q), np.array(section.R)))
                continue
            for key, d in (("Q_prior", n_x), ("R_prior", n_y)):
                _require_shape(getattr(section, key).scale, (d, d), f"{where}.{key}.scale")
            for key, d in (("Q_set", n_x), ("R_set", n_y)):
                for bound in ("lower", "upper"):
                    _require_shape(getattr(getattr(section, key), bound), (d, d), f"{where}.{key}.{bound}")
            Q_prior = _build(lambda: InverseWishart(np.array(section.Q_prior.scale), section.Q_prior.dof), f"{where}.Q_prior")
            R_prior = _build(lambda: InverseWishart(np.array(section.R_prior.scale), section.R_prior.dof), f"{where}.R_prior")
            Q_set = _build(
                lambda: CovarianceConstraintSet(np.array(section.Q_set.lower), np.array(section.Q_set.upper)),
                f"{where}.Q_set",
            )
            R_set = _build(
                lambda: CovarianceConstraintSet(np.array(section.R_set.lower), np.array(section.R_set.upper)),
                f"{where}.R_set",
            )
            for T in section.windows:
                hyper = _build(
                    lambda: Hyperparams(T, section.N, section.J, section.rho, Q_prior, R_prior, Q_set, R_set),
                    where,
                )
                if not Q_set.contains(Q_prior.mean()):
                    raise ConfigError(f"{where}.Q_prior: prior mean lies outside Q_set")
                if not R_set.contains(R_prior.mean()):
                    raise ConfigError(f"{where}.R_prior: prior mean lies outside R_set")
                configs.append(VBMHEConfig(section.name, hyper))
        keys = [(c.name, c.T) for c in configs]
        if len(set(keys)) != len(keys):
            raise ConfigError("filter: (name, T) pairs must be unique")
        return configs


def _require_shape(value: Matrix, shape: tuple[int, int], key: str) -> None:
    got = (len(value), len(value[0]) if value else 0)
    if got != shape:
        raise ConfigError(f"{key}: expected a {shape[0]}x{shape[1]} matrix, got {got[0]}x{got[1]}")


def _build(factory, key: str):
    try:
        return factory()
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _format_validation(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"] if p not in ("nominal-kf", "vb-mhe"))
        lines.append(f"{loc or '<root>'}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def loads_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error: {exc}") from None
    return parse_config(data)


def load_config(path: str | Path) -> RunConfig:
    """Read and validate a configuration file.

    Raises ``OSError`` if the file cannot be read and :class:`ConfigError`
    if its content is invalid.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 text ({exc})") from None
    return loads_config(text)


def _matrix(X) -> Matrix:
    return np.asarray(X, dtype=float).tolist()


def scenario_to_dict(scenario: Scenario) -> dict:
    """The ``[scenario]`` table for a scenario (model written as ``A``, ``C``)."""
    return {
        "seed": scenario.seed,
        "horizon": scenario.horizon,
        "A": _matrix(scenario.model.A),
        "C": _matrix(scenario.model.C),
        "true_Q": _matrix(scenario.true_Q),
        "true_R": _matrix(scenario.true_R),
        "x0_mean": _matrix(scenario.x0_mean),
        "x0_cov": _matrix(scenario.x0_cov),
    }


def scenario_from_dict(data: dict, seed: int | None = None) -> Scenario:
    try:
        section = ScenarioSection.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None
    cfg = RunConfig.model_construct(schema_version=SCHEMA_VERSION, scenario=section)
    return cfg.build_scenario(seed)


def tracking_config(
    seed: int | None = 1, trials: int = 20, windows=(4, 20), N: int = 1, J: int = 100, rho: float = 0.9,
    kappa: float = 3.0, tau: float = 3.0, horizon: int = 500,
) -> dict:
    """Configuration tree for the planar tracking benchmark."""
    hyper = Hyperparams.tracking(T=windows[0], N=N, J=J, rho=rho, kappa=kappa, tau=tau)
    scenario = {
        "horizon": horizon,
        "sampling_interval": 1.0,
        "true_Q": _matrix(50.0 * TRACKING_Q0),
        "true_R": _matrix(3.0 * TRACKING_R0),
        "x0_mean": _matrix(TRACKING_X0),
        "x0_cov": _matrix(TRACKING_P0),
    }
    if seed is not None:
        scenario = {"seed": seed, **scenario}
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "filter": [
            {"type": "nominal-kf", "name": "NKF", "Q": _matrix(TRACKING_Q0), "R": _matrix(TRACKING_R0)},
            {
                "type": "vb-mhe",
                "name": "VB-MHE",
                "T": list(windows),
                "N": N,
                "J": J,
                "rho": rho,
                "Q_prior": {"scale": _matrix(hyper.Q_prior.scale), "dof": hyper.Q_prior.dof},
                "R_prior": {"scale": _matrix(hyper.R_prior.scale), "dof": hyper.R_prior.dof},
                "Q_set": {"lower": _matrix(hyper.Q_set.lower), "upper": _matrix(hyper.Q_set.upper)},
                "R_set": {"lower": _matrix(hyper.R_set.lower), "upper": _matrix(hyper.R_set.upper)},
            },
        ],
        "experiment": {"trials": trials, "output": "bench-out"},
    }


def dumps_config(data: dict) -> str:
    return tomli_w.dumps(data)
