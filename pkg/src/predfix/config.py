"""Experiment configuration: YAML file -> validated dataclasses.

Every key has a default; unknown keys anywhere are a hard error so typos
cannot silently fall back.  Schedule blocks mirror the loss-weight
hyperparameters (warm-up steps, warm-up start/end value, final value);
their step counts are checked against the training length.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ConfigError
from .generators import GeneratorSpec
from .losses import LossWeights, Schedule
from .model import ModelConfig
from .training import OptimizerConfig

RUN_DIR_ENV = "PREDFIX_RUN_DIR"

_SCHEDULE_DEFAULTS = {
    "lam": {"warmup_steps": 100, "warmup_start": 0.01, "warmup_end": 0.1, "final": 1.0},
    "lam_reg": {"warmup_steps": 50, "warmup_start": 0.01, "warmup_end": 0.1, "final": 1.0},
    "lam_c": {"warmup_steps": 100, "warmup_start": 0.1, "warmup_end": 1.0, "final": 10.0},
}

_TRAINING_DEFAULTS = {
    "steps": 1000,
    "batch_size": 8,
    "val_every": 50,
    "labeled_fraction": 1.0,
    "quadrature_order": 64,
}

_EVAL_DEFAULTS = {
    "rho_grid": [0.3, 0.5, 0.7],
    "gamma_grid": [0.0, 0.5, 1.0, 2.0, 4.0],
    "backend": "oracle",
}


@dataclass
class ExperimentConfig:
    seed: int = 0
    run_dir: str = "runs/default"
    generator: GeneratorSpec = field(default_factory=lambda: GeneratorSpec(family="caching"))
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    schedules: dict = field(default_factory=lambda: {k: dict(v) for k, v in _SCHEDULE_DEFAULTS.items()})
    use_class_weights: bool = False
    training: dict = field(default_factory=lambda: dict(_TRAINING_DEFAULTS))
    evaluation: dict = field(default_factory=lambda: dict(_EVAL_DEFAULTS))

    def loss_weights(self, class_rates=None) -> LossWeights:
        steps = self.training["steps"]
        schedules = {}
        for name, block in self.schedules.items():
            if block["warmup_steps"] > steps:
                raise ConfigError(f"{name}.warmup_steps exceeds training.steps")
            schedules[name] = Schedule(
                warmup_start=block["warmup_start"],
                warmup_end=block["warmup_end"],
                final=block["final"],
                warmup_steps=block["warmup_steps"],
                total_steps=steps,
            )
        return LossWeights(
            lam=schedules["lam"],
            lam_reg=schedules["lam_reg"],
            lam_c=schedules["lam_c"],
            class_rates=class_rates,
            use_class_weights=self.use_class_weights,
        )

    def resolved_run_dir(self) -> Path:
        return Path(os.environ.get(RUN_DIR_ENV, self.run_dir))


def _take(block: dict, defaults: dict, context: str) -> dict:
    unknown = set(block) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(block)
    return merged


def _build(data: dict) -> ExperimentConfig:
    top_keys = {
        "seed", "run_dir", "generator", "model", "optimizer", "loss",
        "training", "evaluation",
    }
    unknown = set(data) - top_keys
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    config = ExperimentConfig()
    config.seed = int(data.get("seed", 0))
    config.run_dir = str(data.get("run_dir", "runs/default"))

    gen = dict(data.get("generator", {}))
    gen_keys = {"family", "n_train", "n_val", "n_test", "timesteps", "seed", "params"}
    unknown = set(gen) - gen_keys
    if unknown:
        raise ConfigError(f"unknown keys in generator: {sorted(unknown)}")
    gen.setdefault("family", "caching")
    gen.setdefault("seed", config.seed)
    config.generator = GeneratorSpec(**gen)
    config.generator.resolved_params()  # validates family and params

    model_block = dict(data.get("model", {}))
    model_defaults = ModelConfig().to_dict()
    model_block = _take(model_block, model_defaults, "model")
    model_block.setdefault("seed", config.seed)
    config.model = ModelConfig.from_dict(model_block)

    opt_block = _take(dict(data.get("optimizer", {})), vars(OptimizerConfig()), "optimizer")
    config.optimizer = OptimizerConfig(**opt_block)

    loss_block = dict(data.get("loss", {}))
    config.use_class_weights = bool(loss_block.pop("use_class_weights", False))
    unknown = set(loss_block) - set(_SCHEDULE_DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown keys in loss: {sorted(unknown)}")
    config.schedules = {
        name: _take(dict(loss_block.get(name, {})), defaults, f"loss.{name}")
        for name, defaults in _SCHEDULE_DEFAULTS.items()
    }

    config.training = _take(dict(data.get("training", {})), _TRAINING_DEFAULTS, "training")
    config.evaluation = _take(dict(data.get("evaluation", {})), _EVAL_DEFAULTS, "evaluation")
    if config.evaluation["backend"] not in ("oracle", "export"):
        raise ConfigError(f"unknown evaluation backend {config.evaluation['backend']!r}")
    return config


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return _build(data)


def default_config() -> ExperimentConfig:
    return _build({})
