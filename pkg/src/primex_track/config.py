"""Scenario configuration and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .belief import GaussianBelief, MotionModel, SensorModel
from .errors import ConfigError
from .protocols import ALGORITHMS

DEFAULT_ALGORITHMS = ("cf", "ci-uw", "ci-ow", "primex-c-et", "primex-g-et")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one experiment.

    Defaults reproduce the 40-node, 9-sensor tracking scenario with 7 rounds.
    State ordering is ``[px, py, vx, vy]``.
    """

    K: int = 50
    T: float = 1.0
    process_noise_intensity: float = 25.0
    measurement_noise_var: float = 100.0
    prior_mean: tuple[float, ...] = (0.0, 0.0, 100.0, 100.0)
    prior_cov_scale: float = 25.0
    num_nodes: int = 40
    num_sensors: int = 9
    avg_degree: float = 6.85
    topology_file: str | None = None
    rounds: tuple[int, ...] = (7,)
    algorithms: tuple[str, ...] = DEFAULT_ALGORITHMS
    mc_runs: int = 100
    seed: int = 1
    window_length: int | None = None
    gate_first_round: bool = False
    exact_product_when_disjoint: bool = False
    batch_runs: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "prior_mean", tuple(float(v) for v in self.prior_mean))
        object.__setattr__(self, "rounds", tuple(int(v) for v in self.rounds))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if self.process_noise_intensity < 0:
            raise ConfigError("process_noise_intensity must be nonnegative")
        if self.measurement_noise_var <= 0:
            raise ConfigError("measurement_noise_var must be positive")
        if self.prior_cov_scale <= 0:
            raise ConfigError("prior_cov_scale must be positive")
        if len(self.prior_mean) != 4:
            raise ConfigError("prior_mean must have 4 entries [px, py, vx, vy]")
        if not self.rounds or any(l < 0 for l in self.rounds):
            raise ConfigError("rounds must be a nonempty list of nonnegative integers")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        unknown = [a for a in self.algorithms if a not in ALGORITHMS]
        if unknown:
            raise ConfigError(f"unknown algorithms {unknown}; expected a subset of {list(ALGORITHMS)}")
        if self.mc_runs < 1:
            raise ConfigError("mc_runs must be at least 1")
        if self.window_length is not None and self.window_length < 1:
            raise ConfigError("window_length must be positive or null")
        if self.batch_runs < 0 or self.workers < 1:
            raise ConfigError("batch_runs must be >= 0 and workers >= 1")

    def motion_model(self) -> MotionModel:
        return MotionModel.constant_velocity(self.T, self.process_noise_intensity)

    def sensor_model(self) -> SensorModel:
        return SensorModel.position(self.measurement_noise_var)

    def prior(self) -> GaussianBelief:
        return GaussianBelief.from_moments(np.array(self.prior_mean), self.prior_cov_scale * np.eye(4))

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("prior_mean", "rounds", "algorithms"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        try:
            return cls.from_dict(data)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
