"""Диагностика: проверка градиентов полной функции потерь и линейный зонд."""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.linear_model import RidgeClassifier
from sklearn.metrics import accuracy_score
from sklearn.pipeline import Pipeline, make_pipeline
from sklearn.preprocessing import StandardScaler

from ..audio import AudioSample, batch_and_pad, load_directory
from ..augment import apply, rng_for
from ..autodiff import Graph, grad_check_detail, no_grad
from ..clustering import cluster_batch
from ..errors import ProbeError
from ..loss import LossInputs, combined_loss, draw_negatives
from ..model import Wav2Vec2Model, sample_batch_masks
from ..seeding import make_rng
from .config import TrainConfig
from .loop import length_sorted_chunks, load_banks, load_model
from .synthetic import load_labels, synth_clip

logger = logging.getLogger(__name__)

GRADCHECK_TOLERANCE = 1e-4
# две разные длины: NF = 20 и 24 при шаге 320 и поле 400
GRADCHECK_LENGTHS = (6480, 7760)
GRADCHECK_NEGATIVES = 10
GRADCHECK_CF = 4
GRADCHECK_SF = 0.3
LOSS_INPUTS = ("c_t", "c_t_prime", "q_t", "q_t_prime", "code_logits")


# ---------------------------------------------------------------------------
# Проверка градиентов
# ---------------------------------------------------------------------------
@dataclass
class GradcheckRow:
    name: str
    inputs_error: float
    params_error: float
    coordinates: int
    details: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max(self.inputs_error, self.params_error)

    @property
    def passed(self) -> bool:
        return self.max_error < GRADCHECK_TOLERANCE


@dataclass
class GradcheckReport:
    rows: list

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    def format(self) -> str:
        lines = [f"{'конфигурация':<16} {'входы':>10} {'параметры':>10} {'итог':>10}"]
        for row in self.rows:
            mark = "OK" if row.passed else "!"
            lines.append(
                f"{row.name:<16} {row.inputs_error:>10.2e} {row.params_error:>10.2e} {row.max_error:>10.2e} [{mark}]"
            )
        return "\n".join(lines)


def gradcheck_variants(base: TrainConfig) -> dict[str, TrainConfig]:
    """Четыре варианта цели: baseline, только аугментация, только кластеры, ccc с объединением"""
    variants = {}
    for name, recipe, weights, cf, pooled in (
        ("baseline", "identity", (1.0, 0.0, 0.0), 1, False),
        ("aug-only", "II", (1.0, 0.5, 0.5), 1, False),
        ("cluster-only", "identity", (1.0, 0.0, 0.0), GRADCHECK_CF, False),
        ("ccc-pooled", "II", (1.0, 0.5, 0.5), GRADCHECK_CF, True),
    ):
        config = copy.deepcopy(base)
        config.augment.recipe = recipe
        config.loss.alpha, config.loss.beta, config.loss.gamma = weights
        config.loss.clustering.cf = cf
        config.loss.clustering.pooled = pooled
        config.loss.sf = GRADCHECK_SF if cf > 1 else 1.0
        config.loss.n_negatives = GRADCHECK_NEGATIVES
        variants[name] = config.validate()
    return variants


def _tiny_batch(config: TrainConfig, seed: int):
    samples = [
        AudioSample(synth_clip(kind, length, make_rng(seed, "gradcheck", kind)), id=f"{kind}_gc")
        for kind, length in zip(("tone", "chirp"), GRADCHECK_LENGTHS)
    ]
    augmented = [apply(config.augment, s, rng_for(seed, s.id)) for s in samples]
    widths, strides = config.model.kernel_widths, config.model.strides
    batch = batch_and_pad(samples, widths, strides, np.float64)
    batch = sample_batch_masks(batch, config.model.mask, make_rng(seed, "gradcheck-mask"))
    return batch, batch_and_pad(augmented, widths, strides, np.float64)


def gradcheck_one(
    name: str,
    config: TrainConfig,
    *,
    epsilon: float = 1e-4,
    param_names: int = 8,
    coords_per_param: int = 3,
    max_input_coords: Optional[int] = None,
    seed: int = 0,
) -> GradcheckRow:
    load_banks(config)
    batch, augmented = _tiny_batch(config, seed)
    model = Wav2Vec2Model.initialise(config.model, seed=seed).astype(np.float64)
    # кластеры и негативы фиксируются по невозмущённому проходу
    outputs = model.forward_pair(batch, augmented, mode="argmax")
    cluster_ids = cluster_batch(
        outputs.q_t.data, outputs.q_t_prime.data, outputs.step_counts, batch.num_frames, config.loss.clustering
    )
    negatives = draw_negatives(
        outputs.step_counts, config.loss.n_negatives, make_rng(seed, "gradcheck-negatives"), config.loss.share_negatives
    )
    indices, steps = outputs.code_indices, outputs.step_counts

    def loss_of_inputs(c_t, c_t_prime, q_t, q_t_prime, code_logits):
        inputs = LossInputs(c_t, c_t_prime, q_t, q_t_prime, code_logits, indices, steps)
        return combined_loss(inputs, config.loss, cluster_ids, negatives).total

    values = {n: getattr(outputs, n).data for n in LOSS_INPUTS}
    inputs_report = grad_check_detail(
        Graph(loss_of_inputs, f"{name}/inputs"),
        values,
        epsilon,
        max_coords=max_input_coords,
        rng=make_rng(seed, "gradcheck-inputs"),
    )

    def loss_of_params(**params):
        out = model.bind(params).forward_pair(batch, augmented, mode="argmax")
        return combined_loss(LossInputs.from_outputs(out), config.loss, cluster_ids, negatives).total

    rng = make_rng(seed, "gradcheck-params")
    names = list(model.parameters())
    chosen = sorted(rng.choice(len(names), size=min(param_names, len(names)), replace=False))
    wrt = [names[i] for i in chosen]
    params_report = grad_check_detail(
        Graph(loss_of_params, f"{name}/params"),
        model.state_dict(),
        epsilon,
        wrt=wrt,
        max_coords=coords_per_param,
        rng=rng,
    )
    coordinates = sum(min(v.size, max_input_coords or v.size) for v in values.values()) + sum(
        min(coords_per_param, model.params[n].size) for n in wrt
    )
    row = GradcheckRow(
        name=name,
        inputs_error=max(inputs_report.values()),
        params_error=max(params_report.values()),
        coordinates=coordinates,
        details={**inputs_report, **params_report},
    )
    logger.info("gradcheck %s: входы %.2e, параметры %.2e", name, row.inputs_error, row.params_error)
    return row


def gradcheck_cmd(config: TrainConfig, *, epsilon: float = 1e-4, seed: Optional[int] = None, **kwargs) -> GradcheckReport:
    """Проверка градиентов полной цели (float64) для четырёх конфигураций"""
    seed = config.seed if seed is None else seed
    rows = [
        gradcheck_one(name, variant, epsilon=epsilon, seed=seed, **kwargs)
        for name, variant in gradcheck_variants(config).items()
    ]
    return GradcheckReport(rows)


# ---------------------------------------------------------------------------
# Линейный зонд
# ---------------------------------------------------------------------------
@dataclass
class ProbeResult:
    accuracy: float
    chance: float
    classes: list
    train_clips: int
    test_clips: int
    test_frames: int


def split_clips(labels: dict, test_fraction: float, rng: np.random.Generator) -> tuple[list, list]:
    """Разбиение по клипам, стратифицированное по классам"""
    train, test = [], []
    for cls in sorted(set(labels.values())):
        ids = sorted(i for i, c in labels.items() if c == cls)
        ids = [ids[j] for j in rng.permutation(len(ids))]
        n_test = min(max(1, math.ceil(test_fraction * len(ids))), len(ids) - 1) if len(ids) > 1 else 0
        test.extend(ids[:n_test])
        train.extend(ids[n_test:])
    return sorted(train), sorted(test)


def frame_features(model: Wav2Vec2Model, samples, batch_size: int) -> dict[str, np.ndarray]:
    """Контекстные кадры каждого клипа (без дополнения), модель заморожена"""
    features = {}
    widths, strides = model.config.kernel_widths, model.config.strides
    with no_grad():
        for chunk in length_sorted_chunks(samples, batch_size):
            batch = batch_and_pad([samples[i] for i in chunk], widths, strides, model.dtype)
            frames = model.context_frames(batch)
            for row, i in enumerate(chunk):
                features[samples[i].id] = frames[row, : batch.frame_counts[row]].astype(np.float64)
    return features


def fit_probe(x: np.ndarray, y: np.ndarray, ridge: float) -> Pipeline:
    """Стандартизация признаков и ridge-классификатор один-против-всех"""
    return make_pipeline(StandardScaler(), RidgeClassifier(alpha=ridge)).fit(x, y)


def probe_cmd(
    checkpoint: str,
    corpus_dir: str,
    *,
    seed: int = 0,
    test_fraction: float = 0.25,
    ridge: float = 1e-2,
    batch_size: int = 8,
    workers: int = 4,
) -> ProbeResult:
    """Точность покадровой классификации на отложенных клипах по замороженным кадрам C"""
    labels = load_labels(corpus_dir)
    classes = sorted(set(labels.values()))
    if len(classes) < 2:
        raise ProbeError(f"классов {len(classes)}: нужно хотя бы два")
    model, _, step = load_model(checkpoint)
    samples = [s for s in load_directory(corpus_dir, workers) if s.id in labels]
    features = frame_features(model, samples, batch_size)
    train_ids, test_ids = split_clips({i: labels[i] for i in features}, test_fraction, make_rng(seed, "probe"))
    if not train_ids or not test_ids:
        raise ProbeError("недостаточно клипов для разбиения на обучение и проверку")

    def stack(ids):
        x = np.concatenate([features[i] for i in ids])
        y = np.concatenate([np.full(len(features[i]), classes.index(labels[i])) for i in ids])
        return x, y

    x_train, y_train = stack(train_ids)
    x_test, y_test = stack(test_ids)
    classifier = fit_probe(x_train, y_train, ridge)
    accuracy = float(accuracy_score(y_test, classifier.predict(x_test)))
    logger.info("Зонд %s (шаг %d): точность %.3f на %d кадрах", checkpoint, step, accuracy, len(y_test))
    return ProbeResult(
        accuracy=accuracy,
        chance=1.0 / len(classes),
        classes=classes,
        train_clips=len(train_ids),
        test_clips=len(test_ids),
        test_frames=int(len(y_test)),
    )
