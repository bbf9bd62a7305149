"""Конфигурация модели: свёрточный энкодер, квантователь, маскирование."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..audio import effective_stride, receptive_field
from ..configbase import ConfigSection


@dataclass
class QuantizerConfig(ConfigSection):
    """Произведение G кодовых книг по V векторов; температура Гумбеля убывает по шагам"""

    section_name = "quantizer"

    groups: int = 2
    entries_per_group: int = 16
    d_code: int = 32
    temperature_start: float = 2.0
    temperature_floor: float = 0.5
    temperature_decay: float = 0.999

    @property
    def codebook_count(self) -> int:
        return self.groups * self.entries_per_group

    @property
    def combinations(self) -> int:
        return self.entries_per_group ** self.groups

    def temperature_at(self, step: int) -> float:
        return max(self.temperature_start * self.temperature_decay ** step, self.temperature_floor)

    def problems(self) -> list[str]:
        found = []
        if self.groups < 1:
            found.append(f"groups={self.groups} (нужно >= 1)")
        if self.entries_per_group < 2:
            found.append(f"entries_per_group={self.entries_per_group} (нужно >= 2)")
        if self.d_code < 1:
            found.append(f"d_code={self.d_code}")
        if not 0 < self.temperature_floor <= self.temperature_start:
            found.append(f"температура: floor={self.temperature_floor}, start={self.temperature_start}")
        if not 0 < self.temperature_decay <= 1:
            found.append(f"temperature_decay={self.temperature_decay} вне (0, 1]")
        return found


@dataclass
class MaskConfig(ConfigSection):
    section_name = "mask"

    p_start: float = 0.065
    span_length: int = 10

    def problems(self) -> list[str]:
        found = []
        if not 0.0 <= self.p_start <= 1.0:
            found.append(f"p_start={self.p_start} вне [0, 1]")
        if self.span_length < 1:
            found.append(f"span_length={self.span_length} (нужно >= 1)")
        return found


@dataclass
class ModelConfig(ConfigSection):
    section_name = "model"

    kernel_widths: tuple[int, ...] = (10, 3, 3, 3, 3, 2, 2)
    strides: tuple[int, ...] = (5, 2, 2, 2, 2, 2, 2)
    encoder_channels: tuple[int, ...] = (32, 32, 32, 32, 32, 32, 32)
    d_latent: int = 64
    d_context: int = 64
    n_transformer_layers: int = 2
    n_heads: int = 4
    d_ffn: int = 128
    pos_conv_kernel: int = 9
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    seed: int = 0

    def __post_init__(self):
        self.kernel_widths = tuple(int(v) for v in self.kernel_widths)
        self.strides = tuple(int(v) for v in self.strides)
        self.encoder_channels = tuple(int(v) for v in self.encoder_channels)

    @property
    def effective_stride(self) -> int:
        return effective_stride(self.strides)

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.kernel_widths, self.strides)

    def problems(self) -> list[str]:
        found = []
        layers = {len(self.kernel_widths), len(self.strides), len(self.encoder_channels)}
        if len(layers) != 1 or not self.kernel_widths:
            found.append("kernel_widths/strides/encoder_channels должны быть непустыми и одной длины")
        for name in ("kernel_widths", "strides", "encoder_channels"):
            if any(v < 1 for v in getattr(self, name)):
                found.append(f"{name}: все значения должны быть положительными")
        for name in ("d_latent", "d_context", "n_heads", "d_ffn"):
            if getattr(self, name) < 1:
                found.append(f"{name}={getattr(self, name)}")
        if self.n_transformer_layers < 0:
            found.append(f"n_transformer_layers={self.n_transformer_layers}")
        if self.n_heads >= 1 and self.d_context % self.n_heads:
            found.append(f"d_context={self.d_context} не делится на n_heads={self.n_heads}")
        if self.pos_conv_kernel < 1 or self.pos_conv_kernel % 2 == 0:
            found.append(f"pos_conv_kernel={self.pos_conv_kernel} (нужно нечётное)")
        return found
