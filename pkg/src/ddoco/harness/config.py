"""Experiment configuration and its YAML round trip.

Schema (all sections optional, defaults reproduce the simulation study)::

    seed: 0
    horizon: 200
    system:        {mode, n, m, p, low, high, seed, A, B, C, D, zero_feedthrough}
    data:          {length, input_low, input_high, feedback, max_retries}
    controller:    {n_bar, gamma_u, gamma_y, mu, transient_weight, regularization,
                    rank_tol, steady_rank_tol, pe_tol, window_tol, steady_tol, beta_tol}
    noisy_controller: {<controller key>: value, ...}   # applied for noise cases 2 and 3
    schedule:      {switch_times, num_switches, eta_low, eta_high}
    noise:         {case, data_bound, measurement_bound}
    output:        {directory, prefix}
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

import yaml

from ..controller import ControllerConfig
from ..errors import InvalidInputError
from ..lti import SystemSpec


@dataclass
class DataSpec:
    """Recorded-data settings.

    ``feedback="lqr"`` records the data while a model-based stabilizing state
    feedback acts on the plant, with the uniform excitation added on top;
    ``"none"`` applies the excitation open loop.
    """

    length: int = 100
    input_low: float = -1.0
    input_high: float = 1.0
    feedback: Literal["lqr", "none"] = "lqr"
    max_retries: int = 10


@dataclass
class ControllerSettings:
    n_bar: int = 5
    gamma_u: float = 0.75
    gamma_y: float = 0.75
    mu: int | None = 5
    transient_weight: float = 100.0
    regularization: float = 1.0
    rank_tol: float | None = None
    steady_rank_tol: float | None = None
    pe_tol: float | None = None
    window_tol: float | None = 1e-6
    steady_tol: float | None = 1e-6
    beta_tol: float | None = 1e-6

    def build(self, overrides: dict | None = None) -> ControllerConfig:
        values = dataclasses.asdict(self)
        values.update(overrides or {})
        return ControllerConfig(**values)


def _default_noisy_overrides() -> dict:
    return {"steady_rank_tol": 1e-4, "window_tol": None, "steady_tol": None, "beta_tol": None}


@dataclass
class ScheduleSpec:
    """``switch_times`` (starting at 0) wins over ``num_switches``, which
    otherwise spreads that many switches evenly over the horizon."""

    switch_times: list[int] | None = None
    num_switches: int = 5
    eta_low: float = -1.0
    eta_high: float = 1.0

    def times(self, horizon: int) -> list[int]:
        if self.switch_times is not None:
            return [t for t in self.switch_times if t <= horizon]
        K = self.num_switches
        spaced = [round(k * (horizon + 1) / (K + 1)) for k in range(K + 1)]
        return sorted(set(spaced))


@dataclass
class NoiseSpec:
    """Case 1: noiseless. Case 2: output data noise. Case 3: data and measurement noise."""

    case: int = 1
    data_bound: float = 1e-5
    measurement_bound: float = 1e-2

    def __post_init__(self):
        if self.case not in (1, 2, 3):
            raise InvalidInputError(f"noise case must be 1, 2 or 3, got {self.case}")
        if self.data_bound < 0 or self.measurement_bound < 0:
            raise InvalidInputError("noise bounds must be nonnegative")

    @property
    def data(self) -> float:
        return self.data_bound if self.case in (2, 3) else 0.0

    @property
    def measurement(self) -> float:
        return self.measurement_bound if self.case == 3 else 0.0


@dataclass
class OutputSpec:
    directory: str = "out"
    prefix: str = "run"


@dataclass
class ExperimentConfig:
    seed: int = 0
    horizon: int = 200
    system: SystemSpec = field(default_factory=SystemSpec)
    data: DataSpec = field(default_factory=DataSpec)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    noisy_controller: dict = field(default_factory=_default_noisy_overrides)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def __post_init__(self):
        if self.horizon < 0:
            raise InvalidInputError("horizon must be nonnegative")
        unknown = set(self.noisy_controller) - {f.name for f in dataclasses.fields(ControllerSettings)}
        if unknown:
            raise InvalidInputError(f"unknown noisy_controller keys: {sorted(unknown)}")

    def controller_config(self) -> ControllerConfig:
        overrides = self.noisy_controller if self.noise.case != 1 else None
        return self.controller.build(overrides)

    def replace(self, **changes) -> "ExperimentConfig":
        return from_dict(_merge(to_dict(self), changes))


_SECTIONS = {
    "system": SystemSpec,
    "data": DataSpec,
    "controller": ControllerSettings,
    "schedule": ScheduleSpec,
    "noise": NoiseSpec,
    "output": OutputSpec,
}


def _merge(base: dict, changes: dict) -> dict:
    out = dict(base)
    for key, value in changes.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict) and key != "noisy_controller":
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _section(cls, values: Any):
    if values is None:
        return cls()
    if not isinstance(values, dict):
        raise InvalidInputError(f"section for {cls.__name__} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise InvalidInputError(f"unknown keys for {cls.__name__}: {sorted(unknown)}")
    return cls(**values)


def from_dict(d: dict) -> ExperimentConfig:
    d = dict(d or {})
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise InvalidInputError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {name: _section(cls, d.pop(name, None)) for name, cls in _SECTIONS.items()}
    if "noisy_controller" in d:
        kwargs["noisy_controller"] = dict(d.pop("noisy_controller") or {})
    return ExperimentConfig(**d, **kwargs)


def to_dict(cfg: ExperimentConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        return from_dict(yaml.safe_load(fh))


def dump_config(cfg: ExperimentConfig, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
