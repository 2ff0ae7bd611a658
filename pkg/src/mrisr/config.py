"""Run configuration: one structured file covering every pipeline stage.

The file is YAML (JSON works too) with one section per stage:

    data:          prepare-data options (seed, split_fraction, workers, ...)
    generator:     GeneratorConfig fields
    discriminator: DiscriminatorConfig fields
    train:         TrainConfig fields
    perceptual:    feature-extractor arch + weight file

Unknown sections or keys are rejected by name rather than ignored, so a
typo cannot silently fall back to a default. The effective merged config is
snapshotted into every run directory as canonical JSON.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .errors import ConfigError
from .models import DiscriminatorConfig, GeneratorConfig
from .trainer import TrainConfig


@dataclass
class DataConfig:
    seed: int = 0
    split_fraction: float = 0.8
    scale: int = 4
    pad_to: int = 256
    blank_rule: str = "all_zero"
    grade_override: str | None = None
    workers: int = 1


@dataclass
class PerceptualConfig:
    arch: str = "vgg19"
    weights_path: str | None = None


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    perceptual: PerceptualConfig = field(default_factory=PerceptualConfig)

    def to_dict(self) -> dict:
        return {name: asdict(getattr(self, name)) for name in _SECTIONS}

    def set_seed(self, seed: int) -> None:
        """Funnel one seed into every stage that draws randomness."""
        self.data.seed = int(seed)
        self.train.seed = int(seed)


_SECTIONS = ("data", "generator", "discriminator", "train", "perceptual")


def _apply_section(target, mapping: dict, section: str) -> None:
    allowed = {f.name: f for f in fields(target)}
    for key, value in mapping.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key {section}.{key}")
        current = getattr(target, key)
        if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        setattr(target, key, value)


def from_dict(payload: dict) -> RunConfig:
    if not isinstance(payload, dict):
        raise ConfigError(f"config root must be a mapping, got {type(payload).__name__}")
    cfg = RunConfig()
    for section, mapping in payload.items():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section {section!r}")
        if mapping is None:
            continue
        if not isinstance(mapping, dict):
            raise ConfigError(f"config section {section!r} must be a mapping")
        _apply_section(getattr(cfg, section), mapping, section)
    return cfg


def load_config(path=None) -> RunConfig:
    """Parse the config file (all defaults when path is None)."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        payload = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    return from_dict(payload or {})


def snapshot_config(cfg: RunConfig, path) -> None:
    """Write the effective config as canonical JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")


def validate_all(cfg: RunConfig) -> None:
    cfg.generator.validate()
    cfg.discriminator.validate()
    cfg.train.validate()
    if not 0.0 < cfg.data.split_fraction < 1.0:
        raise ConfigError(f"data.split_fraction must be in (0,1), got {cfg.data.split_fraction}")
    if cfg.data.workers < 1:
        raise ConfigError(f"data.workers must be >= 1, got {cfg.data.workers}")
