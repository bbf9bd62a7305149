"""Маскирование отрезков латентных кадров.

Число отрезков на фрагмент: int(p_start·NF + u), u ~ U[0, 1), но не меньше
одного. Начала выбираются без повторений из [0, NF − M], отрезки длины M
объединяются. Маска общая для исходного и аугментированного вида.
"""
from __future__ import annotations

import logging

import numpy as np

from ..audio import MaskedBatch
from ..errors import MaskError
from .config import MaskConfig

logger = logging.getLogger(__name__)


def sample_mask(nf: int, p_start: float, span_length: int, rng: np.random.Generator) -> np.ndarray:
    """Отсортированные индексы замаскированных кадров в [0, nf)"""
    if nf < 1:
        raise MaskError(f"NF={nf}: нечего маскировать")
    if span_length > nf:
        raise MaskError(f"длина отрезка {span_length} больше числа кадров {nf}")
    if not 0.0 <= p_start <= 1.0:
        raise MaskError(f"p_start={p_start} вне [0, 1]")
    candidates = nf - span_length + 1
    spans = max(int(p_start * nf + rng.random()), 1)
    starts = rng.choice(candidates, size=min(spans, candidates), replace=False)
    masked = np.zeros(nf, dtype=bool)
    for start in starts:
        masked[start : start + span_length] = True
    return np.flatnonzero(masked)


def sample_batch_masks(batch: MaskedBatch, config: MaskConfig, rng: np.random.Generator) -> MaskedBatch:
    """Маски по числу настоящих кадров каждого фрагмента (дополнение не маскируется)"""
    masks = [
        sample_mask(int(nf), config.p_start, config.span_length, rng)
        for nf in batch.frame_counts
    ]
    logger.debug("маски: %s", [m.size for m in masks])
    return batch.with_masks(masks)


def masked_fraction(nf: int, config: MaskConfig, rng: np.random.Generator, trials: int) -> float:
    """Средняя доля замаскированных кадров по Монте-Карло"""
    total = sum(sample_mask(nf, config.p_start, config.span_length, rng).size for _ in range(trials))
    return total / (nf * trials)
