"""Аугментации исходного сигнала: рецепты I и II.

Рецепт I вырезает 25% сигнала (заменяет нулями). Рецепт II последовательно
добавляет шум (SNR 3–15 дБ), свёртку с импульсной характеристикой помещения
и фоновый шум (SNR 0–15 дБ), каждый этап со своей вероятностью.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal as sps

from .audio import MAX_AMPLITUDE, AudioSample
from .configbase import ConfigSection
from .errors import AugmentError
from .seeding import make_rng

logger = logging.getLogger(__name__)

RECIPES = ("identity", "I", "II")
CROP_FRACTION = 0.25


@dataclass
class AugmentConfig(ConfigSection):
    section_name = "augment"

    recipe: str = "identity"
    p_additive: float = 0.6
    snr_additive_db: tuple[float, float] = (3.0, 15.0)
    p_rir: float = 0.7
    p_background: float = 0.8
    snr_background_db: tuple[float, float] = (0.0, 15.0)
    crop_fraction: float = CROP_FRACTION
    seed: int = 0
    noise_bank: list = field(default_factory=list, metadata={"serialize": False})
    rir_bank: list = field(default_factory=list, metadata={"serialize": False})

    def __post_init__(self):
        self.snr_additive_db = tuple(float(v) for v in self.snr_additive_db)
        self.snr_background_db = tuple(float(v) for v in self.snr_background_db)

    def problems(self) -> list[str]:
        found = []
        if self.recipe not in RECIPES:
            found.append(f"recipe={self.recipe!r} (допустимо {', '.join(RECIPES)})")
        for name in ("p_additive", "p_rir", "p_background"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                found.append(f"{name}={value} вне [0, 1]")
        for name in ("snr_additive_db", "snr_background_db"):
            lo, hi = getattr(self, name)
            if lo > hi:
                found.append(f"{name}: пустой диапазон [{lo}, {hi}]")
        if not 0.0 <= self.crop_fraction < 1.0:
            found.append(f"crop_fraction={self.crop_fraction} вне [0, 1)")
        return found

    def bank_problems(self) -> list[str]:
        """Проверка банков шумов после их загрузки"""
        if self.recipe != "II":
            return []
        found = []
        if (self.p_additive > 0 or self.p_background > 0) and not self.noise_bank:
            found.append("noise_bank пуст при ненулевой вероятности шума")
        if self.p_rir > 0 and not self.rir_bank:
            found.append("rir_bank пуст при ненулевой вероятности RIR")
        return found


@dataclass
class AugmentEvent:
    """Одно решение рецепта II (для воспроизводимости и проверки SNR)"""

    stage: str
    applied: bool
    bank_index: Optional[int] = None
    snr_db: Optional[float] = None
    gain: Optional[float] = None
    measured_snr_db: Optional[float] = None


def rng_for(seed: int, sample_id: str, step: int = 0) -> np.random.Generator:
    """Независимый поток для каждого фрагмента и шага"""
    return make_rng(seed, "augment", step, sample_id)


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x, dtype=np.float64))))


# ---------------------------------------------------------------------------
# Отдельные преобразования
# ---------------------------------------------------------------------------
def crop_replace_zeros(x: AudioSample, fraction: float, rng: np.random.Generator) -> AudioSample:
    """Обнулить один непрерывный участок длиной round(fraction·len)"""
    if not 0.0 <= fraction < 1.0:
        raise AugmentError(f"fraction={fraction}: допустимо 0 <= fraction < 1")
    out = x.samples.copy()
    width = int(round(fraction * len(x)))
    if width > 0:
        start = int(rng.integers(0, len(x) - width + 1))
        out[start : start + width] = 0.0
    return x.with_samples(out, "augmented")


def fit_noise(noise: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Короткий шум повторяется, длинный обрезается со случайного места"""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.size < length:
        reps = -(-length // noise.size)
        return np.tile(noise, reps)[:length]
    if noise.size > length:
        start = int(rng.integers(0, noise.size - length + 1))
        return noise[start : start + length]
    return noise


def snr_gain(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> float:
    rms_s, rms_n = _rms(signal), _rms(noise)
    if rms_s == 0.0 or rms_n == 0.0:
        raise AugmentError("SNR не определён для беззвучного сигнала или шума")
    return (rms_s / rms_n) * 10.0 ** (-snr_db / 20.0)


def measured_snr_db(signal: np.ndarray, scaled_noise: np.ndarray) -> float:
    p_s = np.mean(np.square(signal, dtype=np.float64))
    p_n = np.mean(np.square(scaled_noise, dtype=np.float64))
    return float(10.0 * np.log10(p_s / p_n))


def mix_at_snr(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """signal + g·noise, где g подобран так, что SNR слагаемых равен snr_db"""
    signal = np.asarray(signal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if signal.shape != noise.shape:
        raise AugmentError(f"длины сигнала {signal.shape} и шума {noise.shape} различаются")
    return signal + snr_gain(signal, noise, snr_db) * noise


def convolve_rir(signal: np.ndarray, rir: np.ndarray) -> np.ndarray:
    """Полная линейная свёртка, обрезанная до длины сигнала и нормированная на пик входа"""
    rir = np.asarray(rir, dtype=np.float64)
    if rir.size == 0:
        raise AugmentError("пустая импульсная характеристика")
    signal = np.asarray(signal, dtype=np.float64)
    out = sps.convolve(signal, rir, mode="full")[: signal.size]
    peak_in, peak_out = np.abs(signal).max(), np.abs(out).max()
    if peak_out > 0:
        out = out * (peak_in / peak_out)
    return out


def _limit_peak(y: np.ndarray) -> np.ndarray:
    peak = np.abs(y).max()
    if peak > MAX_AMPLITUDE:
        y = y * (MAX_AMPLITUDE / peak)
    return y


# ---------------------------------------------------------------------------
# Рецепты
# ---------------------------------------------------------------------------
def _mix_stage(
    stage: str,
    y: np.ndarray,
    config: AugmentConfig,
    probability: float,
    snr_range: tuple[float, float],
    rng: np.random.Generator,
    events: Optional[list],
) -> np.ndarray:
    if rng.random() >= probability:
        if events is not None:
            events.append(AugmentEvent(stage, False))
        return y
    index = int(rng.integers(len(config.noise_bank)))
    snr = float(rng.uniform(*snr_range))
    noise = fit_noise(config.noise_bank[index].samples, y.size, rng)
    gain = snr_gain(y, noise, snr)
    if events is not None:
        events.append(AugmentEvent(stage, True, index, snr, gain, measured_snr_db(y, gain * noise)))
    return y + gain * noise


def apply(config: AugmentConfig, x: AudioSample, rng: np.random.Generator, events: Optional[list] = None) -> AudioSample:
    """Построить аугментированный вид X′ той же длины, что и X."""
    if config.recipe == "identity":
        return x.with_samples(x.samples.copy(), "augmented")
    if config.recipe == "I":
        return crop_replace_zeros(x, config.crop_fraction, rng)
    if config.recipe != "II":
        raise AugmentError(f"неизвестный рецепт {config.recipe!r}")

    y = np.asarray(x.samples, dtype=np.float64)
    y = _mix_stage("additive", y, config, config.p_additive, config.snr_additive_db, rng, events)
    if rng.random() < config.p_rir:
        index = int(rng.integers(len(config.rir_bank)))
        y = convolve_rir(y, config.rir_bank[index])
        if events is not None:
            events.append(AugmentEvent("rir", True, index))
    elif events is not None:
        events.append(AugmentEvent("rir", False))
    y = _mix_stage("background", y, config, config.p_background, config.snr_background_db, rng, events)

    y = _limit_peak(y)
    if y.size != len(x):
        raise AugmentError(f"{x.id}: длина изменилась {len(x)} -> {y.size}")
    logger.debug("augment %s: %s", x.id, [e.stage for e in events or [] if e.applied])
    return x.with_samples(y.astype(x.samples.dtype), "augmented")


# ---------------------------------------------------------------------------
# Синтетические банки (работа без внешних корпусов)
# ---------------------------------------------------------------------------
def synthetic_noise_bank(seed: int, count: int = 8, length: int = 32000, sample_rate_hz: int = 16000) -> list[AudioSample]:
    rng = make_rng(seed, "noise-bank")
    bank = []
    for i in range(count):
        white = rng.standard_normal(length)
        if i % 2:
            # низкочастотный шум: скользящее среднее
            width = int(rng.integers(4, 32))
            white = np.convolve(white, np.ones(width) / width, mode="same")
        white = 0.5 * white / np.abs(white).max()
        bank.append(AudioSample(white.astype(np.float32), sample_rate_hz, f"noise_{i:02d}"))
    return bank


def synthetic_rir_bank(seed: int, count: int = 8, sample_rate_hz: int = 16000) -> list[np.ndarray]:
    rng = make_rng(seed, "rir-bank")
    bank = []
    for _ in range(count):
        length = int(rng.uniform(0.05, 0.2) * sample_rate_hz)
        t = np.arange(length) / sample_rate_hz
        decay = rng.uniform(0.02, 0.08)
        tail = rng.standard_normal(length) * np.exp(-t / decay)
        tail[0] = 1.0
        bank.append(tail / np.abs(tail).max() * MAX_AMPLITUDE)
    return bank
