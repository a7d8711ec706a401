"""Experiment configuration: YAML file -> nested dataclasses.

Unknown keys anywhere in the tree are rejected. See ``docs/config.md`` for
the schema and ``configs/desk.yaml`` for the default desk-scale experiment.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from ..denoisers import DenoiserSpec
from ..noise import NoiseSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusConfig:
    kind: str = "procedural"  # procedural | directory
    n_images: int = 72
    size: int = 96
    directory: Optional[str] = None


@dataclass(frozen=True)
class SplitConfig:
    train: int = 64
    val: int = 8


@dataclass(frozen=True)
class ModelConfig:
    blocks: int = 2
    filters: int = 16
    expansion: int = 4


@dataclass(frozen=True)
class OptimizerConfig:
    lr: float = 1e-4
    sr_lr: float = 1e-3
    batch_size: int = 8
    sr_epochs: int = 100
    sr_steps_per_epoch: int = 6
    pretrain_epochs: int = 100
    dae_epochs: int = 80
    dae_steps_per_epoch: int = 3


@dataclass(frozen=True)
class SeedConfig:
    corpus: int = 1
    noise: int = 2
    init: int = 3
    sampling: int = 4


def _default_test_noise() -> List[NoiseSpec]:
    return [
        NoiseSpec("gaussian", 0.1, 101),
        NoiseSpec("speckle", 0.1, 102),
        NoiseSpec("poisson", 0.1, 103),
        NoiseSpec("salt_pepper", 0.2, 104),
    ]


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    scale: int = 2
    patch: int = 96
    train_noise: NoiseSpec = field(default_factory=lambda: NoiseSpec("gaussian", 0.1, 11))
    test_noise: List[NoiseSpec] = field(default_factory=_default_test_noise)
    model: ModelConfig = field(default_factory=ModelConfig)
    denoiser_window: int = 5
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    seeds: SeedConfig = field(default_factory=SeedConfig)
    output_dir: str = "runs/desk"

    def __post_init__(self):
        validate(self)

    def to_dict(self) -> dict:
        return _to_plain(self)

    def hash(self) -> str:
        """Content hash of the resolved config (output_dir excluded)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def validate(cfg: ExperimentConfig) -> None:
    if cfg.corpus.kind not in ("procedural", "directory"):
        raise ConfigError(f"corpus.kind must be 'procedural' or 'directory', got {cfg.corpus.kind!r}")
    if cfg.corpus.kind == "directory" and not cfg.corpus.directory:
        raise ConfigError("corpus.directory is required when corpus.kind is 'directory'")
    if cfg.scale < 1:
        raise ConfigError(f"scale must be >= 1, got {cfg.scale}")
    if cfg.patch % cfg.scale:
        raise ConfigError(f"patch {cfg.patch} not divisible by scale {cfg.scale}")
    if cfg.split.train < 1 or cfg.split.val < 1:
        raise ConfigError("split.train and split.val must both be >= 1")
    if cfg.corpus.kind == "procedural":
        if cfg.corpus.n_images < cfg.split.train + cfg.split.val:
            raise ConfigError(
                f"corpus.n_images={cfg.corpus.n_images} < split.train + split.val"
                f" = {cfg.split.train + cfg.split.val}"
            )
        if cfg.corpus.size < cfg.patch:
            raise ConfigError(f"corpus.size {cfg.corpus.size} smaller than patch {cfg.patch}")
    opt = cfg.optimizer
    for name in ("batch_size", "sr_steps_per_epoch", "dae_steps_per_epoch"):
        if getattr(opt, name) < 1:
            raise ConfigError(f"optimizer.{name} must be >= 1")
    for name in ("sr_epochs", "pretrain_epochs", "dae_epochs"):
        if getattr(opt, name) < 0:
            raise ConfigError(f"optimizer.{name} must be >= 0")
    if opt.lr < 0 or opt.sr_lr < 0:
        raise ConfigError("learning rates must be >= 0")
    if not cfg.test_noise:
        raise ConfigError("test_noise needs at least one entry")
    DenoiserSpec("median", window=cfg.denoiser_window)


def _to_plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _build(cls, data, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        path = f"{where}.{key}" if where else key
        kwargs[key] = _convert(hints[key], value, path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where or 'config'}: {exc}") from None


def _convert(tp, value, path):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin is typing.Union:
        inner = [a for a in args if a is not type(None)]
        return None if value is None else _convert(inner[0], value, path)
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        return [_convert(args[0], v, f"{path}[{i}]") for i, v in enumerate(value)]
    if dataclasses.is_dataclass(tp):
        if tp is NoiseSpec and isinstance(value, str):
            try:
                return NoiseSpec.parse(value)
            except ValueError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        return _build(tp, value, path)
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    return value


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return config_from_dict(data or {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def freeze_config(cfg: ExperimentConfig, run_dir) -> Path:
    """Write the resolved config into ``run_dir`` (the run's frozen copy)."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    path = run_dir / "config.resolved.yaml"
    path.write_text(dump_config(cfg), encoding="utf-8")
    return path
