"""Звуковые фрагменты, арифметика кадров энкодера и мини-батчи с дополнением."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import AudioError, BatchError, MaskError

SAMPLE_RATE_HZ = 16000
# Максимальная амплитуда, представимая в PCM16 после деления на 32768
MAX_AMPLITUDE = 32767 / 32768


@dataclass
class AudioSample:
    """Моно-сигнал с частотой дискретизации и происхождением"""

    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE_HZ
    id: str = ""
    provenance: str = "original"

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 1 or self.samples.size == 0:
            raise AudioError(f"{self.id or 'sample'}: ожидается непустой одномерный сигнал")
        if self.samples.dtype not in (np.float32, np.float64):
            self.samples = self.samples.astype(np.float32)
        if self.samples.min() < -1.0 or self.samples.max() >= 1.0:
            raise AudioError(f"{self.id or 'sample'}: значения вне диапазона [-1, 1)")

    def __len__(self) -> int:
        return int(self.samples.size)

    def with_samples(self, samples: np.ndarray, provenance: Optional[str] = None) -> "AudioSample":
        return replace(self, samples=samples, provenance=provenance or self.provenance)


# ---------------------------------------------------------------------------
# Арифметика шагов свёрточного энкодера
# ---------------------------------------------------------------------------
def frame_count(length: int, kernel_widths: Sequence[int], strides: Sequence[int]) -> int:
    """Число латентных кадров: послойно floor((L − k)/s) + 1; 0, если сигнал короче рецептивного поля"""
    current = int(length)
    for k, s in zip(kernel_widths, strides):
        if current < k:
            return 0
        current = (current - k) // s + 1
    return current


def effective_stride(strides: Sequence[int]) -> int:
    return int(np.prod(strides))


def receptive_field(kernel_widths: Sequence[int], strides: Sequence[int]) -> int:
    field_ = 1
    jump = 1
    for k, s in zip(kernel_widths, strides):
        field_ += (k - 1) * jump
        jump *= s
    return field_


# ---------------------------------------------------------------------------
# Мини-батч
# ---------------------------------------------------------------------------
@dataclass
class MaskedBatch:
    """Батч с дополнением нулями; маски общие для исходного и аугментированного вида"""

    waveforms: np.ndarray
    lengths: np.ndarray
    frame_counts: np.ndarray
    padding_frame_mask: np.ndarray
    ids: list[str] = field(default_factory=list)
    mask_indices: Optional[list[np.ndarray]] = None

    @property
    def batch_size(self) -> int:
        return int(self.waveforms.shape[0])

    @property
    def num_frames(self) -> int:
        """NF: число кадров на фрагмент после дополнения"""
        return int(self.padding_frame_mask.shape[1])

    @property
    def padding_sample_mask(self) -> np.ndarray:
        return sample_padding_mask(self.lengths, self.waveforms.shape[1])

    def with_masks(self, mask_indices: Sequence[np.ndarray]) -> "MaskedBatch":
        mask_indices = [np.asarray(m, dtype=np.int64) for m in mask_indices]
        if len(mask_indices) != self.batch_size:
            raise MaskError(f"число масок {len(mask_indices)} не равно размеру батча {self.batch_size}")
        for row, idx in enumerate(mask_indices):
            if idx.size == 0:
                raise MaskError(f"{self.ids[row] if self.ids else row}: пустая маска")
            if idx.min() < 0 or idx.max() >= self.frame_counts[row]:
                raise MaskError(
                    f"{self.ids[row] if self.ids else row}: маска выходит за [0, {self.frame_counts[row]})"
                )
        return replace(self, mask_indices=mask_indices)

    def mask_matrix(self) -> np.ndarray:
        """Булева матрица (B, NF) замаскированных кадров"""
        if self.mask_indices is None:
            raise MaskError("маски ещё не назначены")
        matrix = np.zeros(self.padding_frame_mask.shape, dtype=bool)
        for row, idx in enumerate(self.mask_indices):
            matrix[row, idx] = True
        return matrix


def batch_and_pad(
    samples: Sequence[AudioSample],
    kernel_widths: Sequence[int],
    strides: Sequence[int],
    dtype=np.float32,
) -> MaskedBatch:
    """Дополнить нулями до максимальной длины и посчитать NF по арифметике шагов."""
    if not samples:
        raise BatchError("пустой список фрагментов")
    rates = {s.sample_rate_hz for s in samples}
    if len(rates) != 1:
        raise BatchError(f"разные частоты дискретизации в батче: {sorted(rates)}")
    lengths = np.array([len(s) for s in samples], dtype=np.int64)
    width = int(lengths.max())
    waveforms = np.zeros((len(samples), width), dtype=dtype)
    for row, s in enumerate(samples):
        waveforms[row, : len(s)] = s.samples
    frame_counts = np.array([frame_count(n, kernel_widths, strides) for n in lengths], dtype=np.int64)
    short = [s.id or str(i) for i, (s, nf) in enumerate(zip(samples, frame_counts)) if nf == 0]
    if short:
        raise BatchError(
            f"фрагменты короче рецептивного поля {receptive_field(kernel_widths, strides)}: {', '.join(short)}"
        )
    nf = frame_count(width, kernel_widths, strides)
    padding = np.arange(nf)[None, :] >= frame_counts[:, None]
    return MaskedBatch(
        waveforms=waveforms,
        lengths=lengths,
        frame_counts=frame_counts,
        padding_frame_mask=padding,
        ids=[s.id for s in samples],
    )


def sample_padding_mask(lengths: Sequence[int], width: int) -> np.ndarray:
    """Маска дополнения на уровне отсчётов (True на дополнении)"""
    lengths = np.asarray(lengths)
    return np.arange(width)[None, :] >= lengths[:, None]
