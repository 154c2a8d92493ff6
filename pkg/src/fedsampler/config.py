"""Flat key=value experiment configuration files.

One ``key = value`` pair per line, ``#`` starts a comment, no nesting.
Validation errors name exactly one offending field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from fedsampler.datasets import PartitionSpec, gen_classification_clients, gen_regression_clients
from fedsampler.federation import RoundConfig, StrategyConfig
from fedsampler.models import ModelSpec
from fedsampler.sampling import STRATEGIES, DeltaSamplerConfig


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field_name = field_name


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", "expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    model: str = "regression"
    dimension: int = 1
    classes: int = 10
    data: str = "regression"
    m: int = 20
    samples_per_client: int = 200
    total_samples: int = 2000
    a: float = 10.0
    b: float = 1.0
    noise_std: float = 30.0
    noise_profile: str = "constant"
    label_noise_std: float = 0.1
    alpha: float = 0.5
    rich_fraction: float = 0.1
    rich_share: float = 0.9
    strategy: str = "uniform"
    replacement: str = "without"
    alpha1: float = 0.5
    alpha2: float = 0.5
    clusters: int = 2
    poc_candidates: int = 0  # 0 = default (2 * cohort_size, capped at m)
    reuse_probe: bool = False
    min_prob_mix: float = 0.0
    local_lr: float = 0.001
    server_lr: float = 1.0
    local_steps: int = 2
    batch_size: int = 32
    cohort_size: int = 10
    proximal_mu: float = 0.0
    momentum_gamma: float = 0.0
    rounds: int = 2000
    seeds: tuple = (0,)
    output: str = "out"

    _PARSERS = None  # filled below

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text())

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        pairs = parse_kv(text)
        cfg = cls()
        for key, value in pairs.items():
            if key not in cls._PARSERS:
                raise ConfigError(key, "unknown key")
            parser = cls._PARSERS[key]
            try:
                setattr(cfg, key, parser(value))
            except ConfigError:
                raise
            except ValueError:
                raise ConfigError(key, f"cannot parse value {value!r}")
        cfg.validate()
        return cfg

    def validate(self):
        if self.model not in ("regression", "logistic"):
            raise ConfigError("model", "must be 'regression' or 'logistic'")
        if self.data not in ("regression", "dirichlet", "split"):
            raise ConfigError("data", "must be 'regression', 'dirichlet' or 'split'")
        if self.strategy not in STRATEGIES:
            raise ConfigError("strategy", f"must be one of: {', '.join(STRATEGIES)}")
        if self.replacement not in ("with", "without"):
            raise ConfigError("replacement", "must be 'with' or 'without'")
        if self.noise_profile not in ("constant", "linear", "geometric"):
            raise ConfigError("noise_profile", "must be 'constant', 'linear' or 'geometric'")
        if self.rounds < 1:
            raise ConfigError("rounds", "must be >= 1")
        if not self.seeds:
            raise ConfigError("seeds", "need at least one seed")
        if self.m < 1:
            raise ConfigError("m", "must be >= 1")
        if not 1 <= self.cohort_size <= self.m:
            raise ConfigError("cohort_size", "must lie in [1, m]")
        if self.local_lr <= 0:
            raise ConfigError("local_lr", "must be positive")
        if self.server_lr <= 0:
            raise ConfigError("server_lr", "must be positive")
        if self.local_steps < 1:
            raise ConfigError("local_steps", "must be >= 1")
        if self.proximal_mu < 0:
            raise ConfigError("proximal_mu", "must be nonnegative")
        if not 0 <= self.momentum_gamma < 1:
            raise ConfigError("momentum_gamma", "must lie in [0, 1)")
        if self.noise_std < 0:
            raise ConfigError("noise_std", "must be nonnegative")
        if not 0 <= self.min_prob_mix < 1:
            raise ConfigError("min_prob_mix", "must lie in [0, 1)")
        if self.strategy == "power_of_choice" and self.poc_candidates:
            if not self.cohort_size <= self.poc_candidates <= self.m:
                raise ConfigError("poc_candidates", "must lie in [cohort_size, m]")

    # --- builders ---------------------------------------------------------

    def model_spec(self) -> ModelSpec:
        if self.model == "regression":
            return ModelSpec("regression", dimension=self.dimension)
        return ModelSpec("logistic", dimension=self.classes, n_classes=self.classes)

    def build_clients(self, seed: int):
        if self.data == "regression":
            return gen_regression_clients(
                self.m, self.samples_per_client, self.a, self.b, self.noise_std,
                seed, label_noise_std=self.label_noise_std,
                noise_profile=self.noise_profile)
        partition = PartitionSpec(
            mode=self.data, dirichlet_alpha=self.alpha,
            split_rich_fraction=self.rich_fraction, split_rich_share=self.rich_share)
        return gen_classification_clients(self.m, self.classes, self.total_samples,
                                          partition, seed)

    def round_config(self) -> RoundConfig:
        return RoundConfig(local_lr=self.local_lr, server_lr=self.server_lr,
                           local_steps=self.local_steps, batch_size=self.batch_size,
                           cohort_size=self.cohort_size, proximal_mu=self.proximal_mu,
                           momentum_gamma=self.momentum_gamma)

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(
            name=self.strategy, replacement=self.replacement,
            delta=DeltaSamplerConfig(self.alpha1, self.alpha2),
            clusters=self.clusters,
            poc_candidates=self.poc_candidates or None,
            reuse_probe=self.reuse_probe,
            min_prob_mix=self.min_prob_mix)


def _bool(value: str) -> bool:
    v = value.lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ValueError(value)


def _seeds(value: str) -> tuple:
    return tuple(int(v) for v in value.split(",") if v.strip())


ExperimentConfig._PARSERS = {
    "model": str, "dimension": int, "classes": int, "data": str,
    "m": int, "samples_per_client": int, "total_samples": int,
    "a": float, "b": float, "noise_std": float, "noise_profile": str,
    "label_noise_std": float, "alpha": float,
    "rich_fraction": float, "rich_share": float,
    "strategy": str, "replacement": str,
    "alpha1": float, "alpha2": float, "clusters": int,
    "poc_candidates": int, "reuse_probe": _bool, "min_prob_mix": float,
    "local_lr": float, "server_lr": float, "local_steps": int,
    "batch_size": int, "cohort_size": int,
    "proximal_mu": float, "momentum_gamma": float,
    "rounds": int, "seeds": _seeds, "output": str,
}
