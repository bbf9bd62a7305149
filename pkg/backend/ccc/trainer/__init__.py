"""Предобучение, диагностика и синтетический корпус."""
from .config import LRScheduleConfig, OptimizerConfig, PathsConfig, TrainConfig, config_hash, load_config
from .diagnostics import GradcheckReport, GradcheckRow, ProbeResult, gradcheck_cmd, gradcheck_variants, probe_cmd
from .loop import (
    PreparedBatch,
    PretrainResult,
    batch_schedule,
    compute_loss,
    evaluate_step,
    length_sorted_chunks,
    load_banks,
    load_model,
    prepare_batch,
    pretrain,
    train_step,
    write_checkpoint,
)
from .optim import Adam, lr_at
from .synthetic import CLASSES, SyntheticCorpus, load_labels, make_synthetic, synth_clip, synthetic_samples

__all__ = [
    "Adam",
    "CLASSES",
    "GradcheckReport",
    "GradcheckRow",
    "LRScheduleConfig",
    "OptimizerConfig",
    "PathsConfig",
    "PreparedBatch",
    "PretrainResult",
    "ProbeResult",
    "SyntheticCorpus",
    "TrainConfig",
    "batch_schedule",
    "compute_loss",
    "config_hash",
    "evaluate_step",
    "gradcheck_cmd",
    "gradcheck_variants",
    "length_sorted_chunks",
    "load_banks",
    "load_config",
    "load_labels",
    "load_model",
    "lr_at",
    "make_synthetic",
    "prepare_batch",
    "pretrain",
    "probe_cmd",
    "synth_clip",
    "synthetic_samples",
    "train_step",
    "write_checkpoint",
]
