"""Experiment configuration: a strict JSON document mapped onto dataclasses."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..adversary import ATTACK_KINDS
from ..attribution import DEFAULT_STEPS, METHODS
from ..corpus import KINDS, CorpusError, GeneratorSpec
from ..drift import DriftError, _check_fractions
from ..model import ModelError, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass
class DatasetConfig:
    kind: str | None = "balanced_sentiment"
    num_samples: int = 300
    mean_length: int = 12
    minority_fraction: float | None = None
    seed: int | None = None
    path: str | None = None
    vocab: str | None = None

    def generator_spec(self, seed: int) -> GeneratorSpec:
        return GeneratorSpec(self.kind, self.num_samples, self.mean_length, self.minority_fraction,
                             self.seed if self.seed is not None else seed)


@dataclass
class ModelConfig:
    embed_dim: int = 16
    hidden_dim: int = 32
    learning_rate: float = 0.5
    epochs: int = 60
    batch_size: int = 8
    weight_decay: float = 0.0
    shuffle: bool = True
    unk_dropout: float = 0.1

    def train_config(self, seed: int, epochs: int | None = None) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs if epochs is None else epochs,
                           self.batch_size, self.weight_decay, seed, self.shuffle, self.unk_dropout)


@dataclass
class AttributionConfig:
    method: str = "integrated_gradients"
    steps: int = DEFAULT_STEPS


@dataclass
class MetricsConfig:
    fidelity: bool = True
    non_pert: bool = True
    aopc: int | None = 5
    drift: list[float] | None = field(default_factory=lambda: [0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    random_baseline: bool = True


@dataclass
class AttackConfig:
    kind: str = "greedy_substitute"
    budget: float = 0.5
    table: str | None = None


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    attribution: AttributionConfig = field(default_factory=AttributionConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)
    attack: AttackConfig | None = field(default_factory=AttackConfig)
    adv_training: bool = False
    adv_epochs: int = 20
    seed: int = 0
    output_dir: str = "runs/default"
    max_samples: int = 400
    holdout_fraction: float = 0.2

    def validate(self) -> "ExperimentConfig":
        try:
            _validate(self)
        except (CorpusError, ModelError, DriftError) as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return _build(cls, d, "config").validate()


_NESTED = {"dataset": DatasetConfig, "model": ModelConfig, "attribution": AttributionConfig,
           "metrics": MetricsConfig, "attack": AttackConfig}


def _build(cls, d: Any, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for k, v in d.items():
        if k in _NESTED and cls is ExperimentConfig and v is not None:
            v = _build(_NESTED[k], v, f"{where}.{k}")
        kwargs[k] = v
    return cls(**kwargs)


def _validate(cfg: ExperimentConfig) -> None:
    ds = cfg.dataset
    if ds.path is not None:
        if not Path(ds.path).exists():
            raise ConfigError(f"dataset.path {ds.path!r} does not exist")
        if ds.vocab is not None and not Path(ds.vocab).exists():
            raise ConfigError(f"dataset.vocab {ds.vocab!r} does not exist")
    else:
        if ds.kind not in KINDS:
            raise ConfigError(f"dataset.kind must be one of {KINDS}")
        ds.generator_spec(0)
    m = cfg.model
    if m.embed_dim < 1 or m.hidden_dim < 1:
        raise ConfigError("model dims must be >= 1")
    m.train_config(0)
    if cfg.adv_epochs < 0:
        raise ConfigError("adv_epochs must be >= 0")
    if cfg.attribution.method not in METHODS:
        raise ConfigError(f"attribution.method must be one of {METHODS}")
    if cfg.attribution.steps < 1:
        raise ConfigError("attribution.steps must be >= 1")
    mt = cfg.metrics
    if mt.aopc is not None and (isinstance(mt.aopc, bool) or mt.aopc < 1):
        raise ConfigError("metrics.aopc must be null or an integer L >= 1")
    if mt.drift is not None:
        _check_fractions(mt.drift)
    if cfg.attack is not None:
        if cfg.attack.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack.kind must be one of {ATTACK_KINDS}")
        if not 0.0 < cfg.attack.budget <= 1.0:
            raise ConfigError("attack.budget must lie in (0, 1]")
        if cfg.attack.table is not None and not Path(cfg.attack.table).exists():
            raise ConfigError(f"attack.table {cfg.attack.table!r} does not exist")
    if cfg.adv_training and cfg.attack is None:
        raise ConfigError("adv_training requires an attack")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.max_samples < 1:
        raise ConfigError("max_samples must be >= 1")
    if not 0.0 < cfg.holdout_fraction < 1.0:
        raise ConfigError("holdout_fraction must lie in (0, 1)")


def load_config(path) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(d)
