"""Конфигурация обучения: JSON-файл, поля которого повторяют имена dataclass-полей."""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from ..augment import AugmentConfig
from ..configbase import ConfigSection
from ..errors import ConfigError
from ..loss import LossConfig
from ..model import MODES, ModelConfig


@dataclass
class OptimizerConfig(ConfigSection):
    section_name = "optimizer"

    betas: tuple[float, float] = (0.9, 0.98)
    eps: float = 1e-6
    weight_decay: float = 0.01

    def __post_init__(self):
        self.betas = tuple(float(b) for b in self.betas)

    def problems(self) -> list[str]:
        found = []
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            found.append(f"betas={list(self.betas)}")
        if self.eps <= 0:
            found.append(f"eps={self.eps}")
        if self.weight_decay < 0:
            found.append(f"weight_decay={self.weight_decay}")
        return found


@dataclass
class LRScheduleConfig(ConfigSection):
    """Линейный разогрев до peak_lr, затем полиномиальный спад до нуля"""

    section_name = "lr_schedule"

    peak_lr: float = 5e-4
    warmup_updates: int = 225
    total_updates: int = 300
    power: float = 1.0

    def problems(self) -> list[str]:
        found = []
        if self.peak_lr <= 0:
            found.append(f"peak_lr={self.peak_lr} (нужно > 0)")
        if self.total_updates < 0 or self.warmup_updates < 0:
            found.append("warmup_updates и total_updates не могут быть отрицательными")
        if self.warmup_updates > self.total_updates:
            found.append(f"warmup_updates={self.warmup_updates} > total_updates={self.total_updates}")
        if self.power <= 0:
            found.append(f"power={self.power}")
        return found


@dataclass
class PathsConfig(ConfigSection):
    """Пустая строка означает значение по умолчанию из окружения (config.Config)"""

    section_name = "paths"

    corpus_dir: str = ""
    noise_dir: str = ""
    rir_dir: str = ""
    out_dir: str = ""


@dataclass
class TrainConfig(ConfigSection):
    section_name = "train"

    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    lr_schedule: LRScheduleConfig = field(default_factory=LRScheduleConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    batch_size: int = 8
    seed: int = 0
    quantizer_mode: str = "gumbel"
    checkpoint_every: int = 100
    log_every: int = 10
    prefetch: bool = True

    def problems(self) -> list[str]:
        found = []
        if self.batch_size < 1:
            found.append(f"batch_size={self.batch_size}")
        if self.quantizer_mode not in MODES:
            found.append(f"quantizer_mode={self.quantizer_mode!r} (допустимо {', '.join(MODES)})")
        if self.checkpoint_every < 0 or self.log_every < 1:
            found.append("checkpoint_every >= 0, log_every >= 1")
        return found


def load_config(path: str) -> TrainConfig:
    if not os.path.exists(path):
        raise ConfigError(f"{path}: файл конфигурации не найден")
    try:
        with open(path, encoding="utf-8") as handle:
            data = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: некорректный JSON ({exc})") from exc
    return TrainConfig.from_dict(data).validate()


def config_hash(config: TrainConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
