"""Experiment configuration: YAML in, validated pydantic models out.

Every key is optional; absent keys take the defaults below. Unknown keys
are rejected. Layout::

    network: {alpha: 0.7, beta: 0.5, ...}     # NetworkConfig
    train: {iterations: 50000, gamma: 0.9, ...}  # TrainConfig
    vqc: {n_qubits: 4, n_blocks: 5, ...}       # VqcConfig
    mlp_layers: [4, 64, 64, 2]
    seeds: [0, 1, 2, 3, 4]
    alpha_sweep: [0.1, 0.2, ..., 0.9]
    out_dir: results
    workers: 1
"""
from __future__ import annotations

from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .env import N_FEATURES, NetworkConfig
from .errors import ConfigError, validated
from .train import PAPER_MLP_LAYERS, TrainConfig
from .vqc import VqcConfig

DEFAULT_ALPHA_SWEEP = tuple(round(0.1 * k, 1) for k in range(1, 10))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    network: NetworkConfig = Field(default_factory=NetworkConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    vqc: VqcConfig = Field(default_factory=VqcConfig)
    mlp_layers: tuple[int, ...] = PAPER_MLP_LAYERS
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    alpha_sweep: tuple[float, ...] = DEFAULT_ALPHA_SWEEP
    out_dir: str = "results"
    workers: int = 1

    @model_validator(mode="after")
    def _check(self):
        if not self.seeds:
            raise ValueError("seeds: need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds: duplicates")
        if any(s < 0 for s in self.seeds):
            raise ValueError("seeds: must be non-negative")
        if any(not 0.0 <= a <= 1.0 for a in self.alpha_sweep):
            raise ValueError("alpha_sweep: values must be in [0, 1]")
        if self.vqc.n_qubits != N_FEATURES:
            raise ValueError(f"vqc.n_qubits: the environment emits {N_FEATURES} features, one per qubit")
        if self.vqc.n_actions != 2:
            raise ValueError("vqc.n_actions: the environment has 2 actions")
        if len(self.mlp_layers) < 2 or any(s < 1 for s in self.mlp_layers):
            raise ValueError("mlp_layers: need >= 2 positive sizes")
        if self.mlp_layers[0] != N_FEATURES or self.mlp_layers[-1] != 2:
            raise ValueError(f"mlp_layers: must start with {N_FEATURES} inputs and end with 2 outputs")
        if self.workers < 1:
            raise ValueError("workers: must be >= 1")
        return self

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)


def config_from_dict(data: dict | None) -> ExperimentConfig:
    return validated(ExperimentConfig, data)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"cannot parse {path}: {err}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping, got {type(data).__name__}")
    try:
        return config_from_dict(data)
    except ConfigError as err:
        raise ConfigError(f"{path}: {err}") from None


def dump_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(config.to_yaml())
