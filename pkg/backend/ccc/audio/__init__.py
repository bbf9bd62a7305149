"""Загрузка звука, батчи с дополнением, метрики и контрольные точки."""
from .batching import (
    MAX_AMPLITUDE,
    SAMPLE_RATE_HZ,
    AudioSample,
    MaskedBatch,
    batch_and_pad,
    effective_stride,
    frame_count,
    receptive_field,
    sample_padding_mask,
)
from .storage import (
    CHECKPOINT_VERSION,
    Checkpoint,
    MetricsWriter,
    dump_batch,
    load_checkpoint,
    read_metrics,
    save_checkpoint,
)
from .wav import list_wavs, load_directory, load_wav, save_wav, to_pcm16

__all__ = [
    "AudioSample",
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "MAX_AMPLITUDE",
    "MaskedBatch",
    "MetricsWriter",
    "SAMPLE_RATE_HZ",
    "batch_and_pad",
    "dump_batch",
    "effective_stride",
    "frame_count",
    "list_wavs",
    "load_checkpoint",
    "load_directory",
    "load_wav",
    "read_metrics",
    "receptive_field",
    "sample_padding_mask",
    "save_checkpoint",
    "save_wav",
    "to_pcm16",
]
