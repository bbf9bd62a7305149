"""Модель: энкодер, маскирование, квантователь, контекстная сеть."""
from .config import MaskConfig, ModelConfig, QuantizerConfig
from .masking import masked_fraction, sample_batch_masks, sample_mask
from .quantizer import MODES, QuantizerOutput, gumbel_noise, one_hot, quantize
from .wav2vec import EncoderOutputs, ViewOutputs, Wav2Vec2Model, flat_mask_index

__all__ = [
    "EncoderOutputs",
    "MODES",
    "MaskConfig",
    "ModelConfig",
    "QuantizerConfig",
    "QuantizerOutput",
    "ViewOutputs",
    "Wav2Vec2Model",
    "flat_mask_index",
    "gumbel_noise",
    "masked_fraction",
    "one_hot",
    "quantize",
    "sample_batch_masks",
    "sample_mask",
]
