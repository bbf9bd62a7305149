"""Синтетический корпус: тоны, свипы и полосовой шум.

Позволяет обучать и проверять модель без внешних данных. Рядом с клипами
пишутся labels.json (id клипа -> класс), банк шумов noise/ и банк
импульсных характеристик rir/.
"""
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from ..audio import SAMPLE_RATE_HZ, AudioSample, save_wav
from ..augment import synthetic_noise_bank, synthetic_rir_bank
from ..errors import ConfigError
from ..seeding import make_rng

logger = logging.getLogger(__name__)

CLASSES = ("tone", "chirp", "noise_band")
LABELS_FILE = "labels.json"


@dataclass
class SyntheticCorpus:
    out_dir: str
    clips: int
    labels: dict
    noise_dir: str
    rir_dir: str


def synth_clip(kind: str, length: int, rng: np.random.Generator, sample_rate_hz: int = SAMPLE_RATE_HZ) -> np.ndarray:
    t = np.arange(length) / sample_rate_hz
    if kind == "tone":
        f0 = rng.uniform(150.0, 600.0)
        x = sum(rng.uniform(0.3, 1.0) / h * np.sin(2 * np.pi * h * f0 * t + rng.uniform(0, 2 * np.pi)) for h in (1, 2, 3))
    elif kind == "chirp":
        f0, f1 = rng.uniform(200.0, 800.0), rng.uniform(1500.0, 4000.0)
        if rng.random() < 0.5:
            f0, f1 = f1, f0
        x = sps.chirp(t, f0=f0, t1=t[-1] if length > 1 else 1.0, f1=f1, method="linear")
    elif kind == "noise_band":
        low = rng.uniform(300.0, 2500.0)
        sos = sps.butter(4, [low, low * rng.uniform(1.3, 2.0)], btype="bandpass", fs=sample_rate_hz, output="sos")
        x = sps.sosfilt(sos, rng.standard_normal(length))
    else:
        raise ConfigError(f"неизвестный класс {kind!r} (допустимо {', '.join(CLASSES)})")
    x = np.asarray(x, dtype=np.float64)
    # медленная огибающая: клипы не стационарны
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(0.5, 3.0) * t + rng.uniform(0, 2 * np.pi))
    x = x * envelope + 0.01 * rng.standard_normal(length)
    return (rng.uniform(0.3, 0.8) * x / np.abs(x).max()).astype(np.float32)


def synthetic_samples(clips: int, seed: int, duration_s: float = 1.0, jitter_s: float = 0.0) -> list[AudioSample]:
    """Клипы в памяти; классы чередуются, чтобы корпус был сбалансирован"""
    samples = []
    for i in range(clips):
        kind = CLASSES[i % len(CLASSES)]
        rng = make_rng(seed, "clip", i)
        duration = duration_s + (rng.uniform(-jitter_s, jitter_s) if jitter_s else 0.0)
        length = int(round(duration * SAMPLE_RATE_HZ))
        samples.append(AudioSample(synth_clip(kind, length, rng), SAMPLE_RATE_HZ, f"{kind}_{i:04d}"))
    return samples


def class_of(sample_id: str) -> str:
    return sample_id.rsplit("_", 1)[0]


def make_synthetic(out_dir: str, clips: int = 200, seed: int = 0, duration_s: float = 1.0, jitter_s: float = 0.0) -> SyntheticCorpus:
    if clips < 1:
        raise ConfigError(f"clips={clips} (нужно >= 1)")
    os.makedirs(out_dir, exist_ok=True)
    labels = {}
    for sample in synthetic_samples(clips, seed, duration_s, jitter_s):
        save_wav(sample, os.path.join(out_dir, f"{sample.id}.wav"))
        labels[sample.id] = class_of(sample.id)
    with open(os.path.join(out_dir, LABELS_FILE), "w", encoding="utf-8") as handle:
        json.dump(labels, handle, ensure_ascii=False, indent=2, sort_keys=True)

    noise_dir = os.path.join(out_dir, "noise")
    for noise in synthetic_noise_bank(seed):
        save_wav(noise, os.path.join(noise_dir, f"{noise.id}.wav"))
    rir_dir = os.path.join(out_dir, "rir")
    for i, rir in enumerate(synthetic_rir_bank(seed)):
        save_wav(AudioSample(rir.astype(np.float32), SAMPLE_RATE_HZ, f"rir_{i:02d}"), os.path.join(rir_dir, f"rir_{i:02d}.wav"))
    logger.info("Синтетический корпус: %d клипов в %s", clips, out_dir)
    return SyntheticCorpus(out_dir, clips, labels, noise_dir, rir_dir)


def load_labels(corpus_dir: str) -> dict:
    path = os.path.join(corpus_dir, LABELS_FILE)
    if not os.path.exists(path):
        raise ConfigError(f"{path}: нет файла меток")
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)
