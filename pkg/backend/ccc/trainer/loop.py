"""Цикл предобучения: аугментация -> общие маски -> парный проход ->
кластеризация -> функция потерь -> обратный проход -> шаг Adam."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np
from config import Config

from ..audio import (
    AudioSample,
    MaskedBatch,
    MetricsWriter,
    batch_and_pad,
    dump_batch,
    load_checkpoint,
    load_directory,
    save_checkpoint,
)
from ..augment import apply, rng_for, synthetic_noise_bank, synthetic_rir_bank
from ..autodiff import no_grad, strict_mode
from ..clustering import cluster_batch
from ..errors import BatchError, ConfigError, TrainingAborted
from ..loss import LossBreakdown, LossInputs, combined_loss, draw_negatives
from ..model import Wav2Vec2Model, sample_batch_masks
from ..seeding import make_rng
from .config import TrainConfig, config_hash
from .optim import Adam, lr_at

logger = logging.getLogger(__name__)

INIT_CHECKPOINT = "checkpoint_init.npz"
LAST_CHECKPOINT = "checkpoint_last.npz"
METRICS_FILE = "metrics.jsonl"


@dataclass
class PreparedBatch:
    """Исходный и аугментированный батчи с общими масками"""

    step: int
    batch: MaskedBatch
    augmented: MaskedBatch

    @property
    def ids(self) -> list[str]:
        return self.batch.ids


@dataclass
class PretrainResult:
    out_dir: str
    checkpoint_path: str
    metrics_path: str
    steps: int
    history: list = field(default_factory=list)

    @property
    def first(self) -> Optional[dict]:
        return self.history[0] if self.history else None

    @property
    def last(self) -> Optional[dict]:
        return self.history[-1] if self.history else None


# ---------------------------------------------------------------------------
# Батчи
# ---------------------------------------------------------------------------
def length_sorted_chunks(samples: Sequence[AudioSample], batch_size: int) -> list[list[int]]:
    """Клипы сортируются по длине (затем по id) и режутся на батчи подряд"""
    order = sorted(range(len(samples)), key=lambda i: (len(samples[i]), samples[i].id))
    return [order[i : i + batch_size] for i in range(0, len(order), batch_size)]


def batch_schedule(samples: Sequence[AudioSample], batch_size: int, seed: int) -> Iterator[list[int]]:
    """Бесконечная последовательность батчей; порядок батчей перемешивается каждую эпоху"""
    if not samples:
        raise BatchError("пустой корпус")
    chunks = length_sorted_chunks(samples, batch_size)
    epoch = 0
    while True:
        for index in make_rng(seed, "epoch", epoch).permutation(len(chunks)):
            yield chunks[index]
        epoch += 1


def prepare_batch(
    samples: Sequence[AudioSample],
    config: TrainConfig,
    step: int,
    dtype=np.float32,
) -> PreparedBatch:
    """Построить X′, дополнить оба вида и выбрать общие маски; чистая функция шага"""
    augmented = [apply(config.augment, s, rng_for(config.seed, s.id, step)) for s in samples]
    widths, strides = config.model.kernel_widths, config.model.strides
    batch = batch_and_pad(samples, widths, strides, dtype)
    aug_batch = batch_and_pad(augmented, widths, strides, dtype)
    batch = sample_batch_masks(batch, config.model.mask, make_rng(config.seed, "mask", step))
    return PreparedBatch(step=step, batch=batch, augmented=aug_batch)


def load_banks(config: TrainConfig, workers: int = 4) -> None:
    """Заполнить банки шумов и RIR для рецепта II (из каталогов или синтетические)"""
    augment = config.augment
    if augment.recipe != "II":
        return
    if not augment.noise_bank:
        noise_dir = config.paths.noise_dir
        augment.noise_bank = load_directory(noise_dir, workers) if noise_dir else synthetic_noise_bank(augment.seed)
    if not augment.rir_bank:
        rir_dir = config.paths.rir_dir
        if rir_dir:
            augment.rir_bank = [s.samples.astype(np.float64) for s in load_directory(rir_dir, workers)]
        else:
            augment.rir_bank = synthetic_rir_bank(augment.seed)
    problems = augment.bank_problems()
    if problems:
        raise ConfigError(f"augment: {'; '.join(problems)}")


# ---------------------------------------------------------------------------
# Шаг обучения
# ---------------------------------------------------------------------------
def compute_loss(
    model: Wav2Vec2Model,
    prepared: PreparedBatch,
    config: TrainConfig,
    mode: Optional[str] = None,
) -> LossBreakdown:
    step = prepared.step
    outputs = model.forward_pair(
        prepared.batch,
        prepared.augmented,
        step=max(step - 1, 0),
        mode=mode or config.quantizer_mode,
        rng=make_rng(config.seed, "gumbel", step),
    )
    cluster_ids = cluster_batch(
        outputs.q_t.data,
        outputs.q_t_prime.data,
        outputs.step_counts,
        prepared.batch.num_frames,
        config.loss.clustering,
        step,
    )
    negatives = draw_negatives(
        outputs.step_counts,
        config.loss.n_negatives,
        make_rng(config.seed, "negatives", step),
        share=config.loss.share_negatives,
    )
    return combined_loss(LossInputs.from_outputs(outputs), config.loss, cluster_ids, negatives)


def _abort(prepared: PreparedBatch, out_dir: str, value: float) -> TrainingAborted:
    path = dump_batch(
        os.path.join(out_dir, f"nan_batch_{prepared.step}.npz"),
        ids=prepared.ids,
        waveforms=prepared.batch.waveforms,
        step=prepared.step,
        extra={"augmented": prepared.augmented.waveforms, "lengths": prepared.batch.lengths},
    )
    batch_id = ",".join(prepared.ids)
    logger.error("Шаг %d: функция потерь %r, батч %s сохранён в %s", prepared.step, value, batch_id, path)
    return TrainingAborted(
        f"шаг {prepared.step}: функция потерь {value!r} (батч {batch_id})",
        step=prepared.step,
        batch_id=batch_id,
        dump_path=path,
    )


def train_step(
    model: Wav2Vec2Model,
    optimizer: Adam,
    prepared: PreparedBatch,
    config: TrainConfig,
    out_dir: str,
) -> tuple[LossBreakdown, float]:
    breakdown = compute_loss(model, prepared, config)
    if not np.isfinite(breakdown.l_total):
        raise _abort(prepared, out_dir, breakdown.l_total)
    optimizer.zero_grad()
    breakdown.total.backward()
    lr = lr_at(prepared.step, config.lr_schedule)
    optimizer.step(lr)
    return breakdown, lr


def evaluate_step(model: Wav2Vec2Model, prepared: PreparedBatch, config: TrainConfig) -> LossBreakdown:
    """Та же функция потерь без обновления параметров"""
    with no_grad():
        return compute_loss(model, prepared, config)


# ---------------------------------------------------------------------------
# Контрольные точки
# ---------------------------------------------------------------------------
def write_checkpoint(path: str, model: Wav2Vec2Model, config: TrainConfig, step: int) -> str:
    return save_checkpoint(path, model.state_dict(), step=step, config=config.to_dict(), config_hash=config_hash(config))


def load_model(path: str) -> tuple[Wav2Vec2Model, TrainConfig, int]:
    checkpoint = load_checkpoint(path)
    config = TrainConfig.from_dict(checkpoint.config).validate()
    model = Wav2Vec2Model.initialise(config.model, seed=config.seed)
    model.load_state_dict(checkpoint.params)
    return model, config, checkpoint.step


# ---------------------------------------------------------------------------
# Предобучение
# ---------------------------------------------------------------------------
def _resolve_paths(config: TrainConfig) -> None:
    paths = config.paths
    paths.corpus_dir = paths.corpus_dir or os.path.join(Config.CCC_DATA_DIR, "synthetic")
    paths.out_dir = paths.out_dir or os.path.join(Config.CCC_OUT_DIR, "default")


def pretrain(
    config: TrainConfig,
    *,
    samples: Optional[Sequence[AudioSample]] = None,
    strict: bool = False,
    workers: int = 4,
) -> PretrainResult:
    """Полный прогон: total_updates шагов, метрики и контрольные точки в paths.out_dir."""
    config.validate()
    _resolve_paths(config)
    out_dir = config.paths.out_dir
    os.makedirs(out_dir, exist_ok=True)
    if samples is None:
        samples = load_directory(config.paths.corpus_dir, workers)
    if not samples:
        raise BatchError(f"{config.paths.corpus_dir}: пустой корпус")
    load_banks(config, workers)

    model = Wav2Vec2Model.initialise(config.model, seed=config.seed)
    optimizer = Adam(model.parameters(), config.optimizer)
    write_checkpoint(os.path.join(out_dir, INIT_CHECKPOINT), model, config, 0)
    total = config.lr_schedule.total_updates
    logger.info(
        "Предобучение: %d шагов, %d клипов, батч %d, рецепт %s, CF=%d -> %s",
        total, len(samples), config.batch_size, config.augment.recipe, config.loss.clustering.cf, out_dir,
    )

    metrics_path = os.path.join(out_dir, METRICS_FILE)
    schedule = batch_schedule(samples, config.batch_size, config.seed)

    next_indices: dict[int, list[int]] = {}

    def prepare(step: int) -> PreparedBatch:
        return prepare_batch([samples[i] for i in next_indices[step]], config, step)

    history = []
    with MetricsWriter(metrics_path) as writer, ThreadPoolExecutor(max_workers=1) as pool, strict_mode(strict):
        pending = None
        if total:
            next_indices[1] = next(schedule)
            pending = pool.submit(prepare, 1) if config.prefetch else None
        for step in range(1, total + 1):
            prepared = pending.result() if pending is not None else prepare(step)
            del next_indices[step]
            if step < total:
                next_indices[step + 1] = next(schedule)
                pending = pool.submit(prepare, step + 1) if config.prefetch else None
            breakdown, lr = train_step(model, optimizer, prepared, config, out_dir)
            row = {"step": step, **breakdown.as_metrics(), "lr": lr,
                   "temperature": config.model.quantizer.temperature_at(step - 1)}
            writer.append(row)
            history.append(row)
            if step % config.log_every == 0 or step == total:
                logger.info(
                    "шаг %d/%d: l_total=%.4f l_c=%.4f acc=%.3f lr=%.2e",
                    step, total, breakdown.l_total, breakdown.l_c, breakdown.contrastive_accuracy, lr,
                )
            if config.checkpoint_every and step % config.checkpoint_every == 0 and step != total:
                write_checkpoint(os.path.join(out_dir, f"checkpoint_{step:06d}.npz"), model, config, step)

    last = write_checkpoint(os.path.join(out_dir, LAST_CHECKPOINT), model, config, total)
    return PretrainResult(out_dir=out_dir, checkpoint_path=last, metrics_path=metrics_path, steps=total, history=history)
