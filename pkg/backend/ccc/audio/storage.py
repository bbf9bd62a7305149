"""Метрики (JSON lines) и контрольные точки (npz с именованными тензорами)."""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ..errors import CheckpointError

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

METRIC_FIELDS = (
    "step",
    "l_c",
    "l_cross",
    "l_cross_prime",
    "l_div",
    "l_total",
    "contrastive_accuracy",
    "codebook_perplexity",
)


class MetricsWriter:
    """Одна JSON-запись на шаг обучения; файл создаётся заново при открытии."""

    def __init__(self, path: str):
        self.path = path
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self._handle = open(path, "w", encoding="utf-8")
        self.rows = 0

    def append(self, row: Mapping[str, object]) -> None:
        ordered = {k: row[k] for k in METRIC_FIELDS if k in row}
        ordered.update({k: v for k, v in row.items() if k not in ordered})
        self._handle.write(json.dumps(ordered, ensure_ascii=False) + "\n")
        self._handle.flush()
        self.rows += 1

    def close(self) -> None:
        self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


@dataclass
class Checkpoint:
    params: dict[str, np.ndarray]
    step: int
    config: dict
    config_hash: str
    version: int = CHECKPOINT_VERSION


def save_checkpoint(
    path: str,
    params: Mapping[str, np.ndarray],
    *,
    step: int,
    config: Mapping,
    config_hash: str,
) -> str:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    arrays = {f"param/{name}": np.asarray(value) for name, value in params.items()}
    arrays["__version__"] = np.array(CHECKPOINT_VERSION)
    arrays["__step__"] = np.array(int(step))
    arrays["__config_hash__"] = np.array(config_hash)
    arrays["__config__"] = np.array(json.dumps(config, sort_keys=True, ensure_ascii=False))
    with open(path, "wb") as handle:
        np.savez(handle, **arrays)
    logger.info("Контрольная точка %s (шаг %d)", path, step)
    return path


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise CheckpointError(f"{path}: файл не найден")
    try:
        with np.load(path, allow_pickle=False) as archive:
            version = int(archive["__version__"])
            if version != CHECKPOINT_VERSION:
                raise CheckpointError(f"{path}: версия {version} не поддерживается")
            params = {k[len("param/"):]: archive[k].copy() for k in archive.files if k.startswith("param/")}
            return Checkpoint(
                params=params,
                step=int(archive["__step__"]),
                config=json.loads(str(archive["__config__"])),
                config_hash=str(archive["__config_hash__"]),
                version=version,
            )
    except (KeyError, ValueError, OSError) as exc:
        raise CheckpointError(f"{path}: повреждённая контрольная точка ({exc})") from exc


def dump_batch(path: str, *, ids, waveforms: np.ndarray, step: int, extra: Optional[Mapping] = None) -> str:
    """Сохранить батч, на котором обучение прервалось"""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    payload = {"ids": np.array(list(ids)), "waveforms": waveforms, "step": np.array(step)}
    for key, value in (extra or {}).items():
        payload[key] = np.asarray(value)
    with open(path, "wb") as handle:
        np.savez(handle, **payload)
    return path
