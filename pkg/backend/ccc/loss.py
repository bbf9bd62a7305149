"""Функции потерь: контрастная, перекрёстные контрастные, разнообразие кодов.

Все три контрастные слагаемые считаются как InfoNCE по косинусному сходству с
температурой kappa. Негативы из кластера позитива масштабируются на SF
(при SF = NEG_INFINITY, т.е. None, полностью исключаются). Позитив не
масштабируется никогда. Потери шагов усредняются внутри фрагмента, затем
по фрагментам.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from .autodiff import Tensor, ops
from .clustering import ClusterConfig, ClusterIds
from .configbase import ConfigSection
from .errors import LossError

logger = logging.getLogger(__name__)

# SF = −∞ хранится как отсутствие значения
NEG_INFINITY = None
NORMALIZATION_TOLERANCE = 1e-5


def parse_sf(value: Any) -> Optional[float]:
    if value is None:
        return NEG_INFINITY
    if isinstance(value, str):
        if value.strip().lower() in ("-inf", "-infinity", "neg_infinity", "-∞"):
            return NEG_INFINITY
        value = float(value)
    value = float(value)
    if value == -math.inf:
        return NEG_INFINITY
    return value


def format_sf(sf: Optional[float]) -> str:
    return "-∞" if sf is NEG_INFINITY else f"{sf:g}"


@dataclass
class LossConfig(ConfigSection):
    section_name = "loss"

    kappa: float = 0.1
    n_negatives: int = 100
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0
    sf: Optional[float] = 1.0
    diversity_weight: float = 0.1
    share_negatives: bool = False
    clustering: ClusterConfig = field(default_factory=ClusterConfig)

    @classmethod
    def _decode_field(cls, name, value):
        return parse_sf(value) if name == "sf" else value

    def _encode_field(self, name, value):
        return "-inf" if name == "sf" and value is NEG_INFINITY else value

    def problems(self) -> list[str]:
        found = []
        if not self.kappa > 0:
            found.append(f"kappa={self.kappa} (нужно > 0)")
        if self.n_negatives < 1:
            found.append(f"n_negatives={self.n_negatives} (нужно >= 1)")
        for name in ("alpha", "beta", "gamma", "diversity_weight"):
            if getattr(self, name) < 0:
                found.append(f"{name}={getattr(self, name)} (нужно >= 0)")
        if self.sf is not NEG_INFINITY and not math.isfinite(self.sf):
            found.append(f"sf={self.sf}")
        return found


# ---------------------------------------------------------------------------
# Негативы
# ---------------------------------------------------------------------------
@dataclass
class NegativeDraws:
    """Индексы негативов (N, n_negatives) в развёрнутых целях, по слагаемым"""

    l_c: np.ndarray
    l_cross: np.ndarray
    l_cross_prime: np.ndarray


def sample_negatives(masked_step_count: int, positive_index: int, n_negatives: int, rng: np.random.Generator) -> np.ndarray:
    """Равномерно с возвращением из шагов фрагмента, кроме позитива"""
    if masked_step_count < 2:
        raise LossError(f"шагов {masked_step_count}: негативов нет")
    if not 0 <= positive_index < masked_step_count:
        raise LossError(f"позитив {positive_index} вне [0, {masked_step_count})")
    draws = rng.integers(0, masked_step_count - 1, size=n_negatives)
    return draws + (draws >= positive_index)


def sample_negative_table(step_counts: Sequence[int], n_negatives: int, rng: np.random.Generator) -> np.ndarray:
    """Негативы для всех шагов батча; каждый шаг берёт их из своего фрагмента"""
    tables = []
    offset = 0
    for count in step_counts:
        count = int(count)
        if count < 2:
            raise LossError(f"во фрагменте {count} замаскированных шагов: негативов нет")
        draws = rng.integers(0, count - 1, size=(count, n_negatives))
        draws += draws >= np.arange(count)[:, None]
        tables.append(draws + offset)
        offset += count
    return np.concatenate(tables, axis=0)


def draw_negatives(step_counts: Sequence[int], n_negatives: int, rng: np.random.Generator, share: bool = False) -> NegativeDraws:
    first = sample_negative_table(step_counts, n_negatives, rng)
    if share:
        return NegativeDraws(first, first, first)
    return NegativeDraws(
        first,
        sample_negative_table(step_counts, n_negatives, rng),
        sample_negative_table(step_counts, n_negatives, rng),
    )


# ---------------------------------------------------------------------------
# InfoNCE
# ---------------------------------------------------------------------------
@dataclass
class TermResult:
    loss: Tensor
    correct: int
    count: int
    scaled: int


def info_nce_rows(sims: Tensor, flags: Optional[np.ndarray], sf: Optional[float], kappa: float) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Потери строк (R,) по сходствам (R, 1+K): в столбце 0 позитив.

    Возвращает также логиты и маску учитываемых кандидатов.
    """
    if np.isnan(sims.data).any():
        raise LossError("NaN в косинусном сходстве")
    rows, width = sims.shape
    keep = np.ones((rows, width), dtype=bool)
    if flags is None or sf == 1.0 or not flags.any():
        logits = sims / kappa
    elif sf is NEG_INFINITY:
        keep[:, 1:] = ~flags
        logits = sims / kappa
    else:
        scale = np.ones((rows, width), dtype=sims.dtype)
        scale[:, 1:] = np.where(flags, sf, 1.0)
        logits = sims * scale / kappa
    losses = ops.masked_logsumexp(logits, keep, axis=-1) - logits[:, 0]
    return losses, logits.data, keep


def _accuracy(logits: np.ndarray, keep: np.ndarray) -> int:
    """Верно, если позитив даёт argmax и не одновременно argmin (равные строки не засчитываются)"""
    top = np.where(keep, logits, -np.inf).argmax(axis=-1)
    bottom = np.where(keep, logits, np.inf).argmin(axis=-1)
    return int(((top == 0) & ~(bottom == 0)).sum())


def contrastive_loss(
    c_t: Tensor,
    q_t: Tensor,
    negatives: Tensor,
    same_cluster_flags: Optional[np.ndarray],
    sf: Optional[float],
    kappa: float,
) -> Tensor:
    """Потеря одного шага: c_t (d,), q_t (d,), negatives (K, d), флаги (K,)"""
    if kappa <= 0:
        raise LossError(f"kappa={kappa} (нужно > 0)")
    if same_cluster_flags is not None and len(same_cluster_flags) != negatives.shape[0]:
        raise LossError(f"флагов {len(same_cluster_flags)}, негативов {negatives.shape[0]}")
    positive = ops.cosine_similarity(c_t, q_t).reshape(1)
    negative = ops.cosine_similarity(c_t.reshape(1, -1), negatives)
    sims = ops.concatenate([positive, negative], axis=0).reshape(1, -1)
    flags = None if same_cluster_flags is None else np.asarray(same_cluster_flags, dtype=bool).reshape(1, -1)
    losses, _, _ = info_nce_rows(sims, flags, sf, kappa)
    return losses.reshape(())


def step_weights(step_counts: Sequence[int], dtype=np.float64) -> np.ndarray:
    """Веса шагов: среднее по шагам фрагмента, затем по фрагментам"""
    counts = np.asarray(step_counts, dtype=np.int64)
    return np.repeat(1.0 / (counts * counts.size), counts).astype(dtype)


def batch_similarities(anchors: Tensor, targets: Tensor, negative_index: np.ndarray) -> Tensor:
    """(N, 1+K) косинусных сходств: позитив targets[n] и негативы targets[negative_index[n]]"""
    n, width = anchors.shape
    candidates = np.concatenate([np.arange(n)[:, None], negative_index], axis=1)
    cand = ops.gather_rows(ops.l2_normalize(targets, axis=-1), candidates)
    sims = ops.matmul(cand, ops.l2_normalize(anchors, axis=-1).reshape(n, width, 1))
    return sims.reshape(n, candidates.shape[1])


def info_nce(
    anchors: Tensor,
    targets: Tensor,
    negative_index: np.ndarray,
    cluster_ids: Optional[np.ndarray],
    sf: Optional[float],
    kappa: float,
    step_counts: Sequence[int],
) -> TermResult:
    if anchors.shape != targets.shape or anchors.shape[0] != negative_index.shape[0]:
        raise LossError(
            f"несогласованные шаги: якоря {anchors.shape}, цели {targets.shape}, негативы {negative_index.shape}"
        )
    if int(np.sum(step_counts)) != anchors.shape[0]:
        raise LossError(f"сумма шагов {int(np.sum(step_counts))} не равна {anchors.shape[0]}")
    sims = batch_similarities(anchors, targets, negative_index)
    flags = None
    if cluster_ids is not None:
        flags = cluster_ids[negative_index] == cluster_ids[:, None]
    losses, logits, keep = info_nce_rows(sims, flags, sf, kappa)
    weights = step_weights(step_counts, anchors.dtype)
    scaled = 0 if flags is None or sf == 1.0 else int(flags.sum())
    return TermResult(
        loss=(losses * weights).sum(),
        correct=_accuracy(logits, keep),
        count=anchors.shape[0],
        scaled=scaled,
    )


def cross_contrastive_losses(
    c_t: Tensor,
    c_t_prime: Tensor,
    q_t: Tensor,
    q_t_prime: Tensor,
    negatives: NegativeDraws,
    cluster_ids: Optional[ClusterIds],
    sf: Optional[float],
    kappa: float,
    step_counts: Sequence[int],
) -> tuple[TermResult, TermResult]:
    """c_t против q_t′ (негативы из Q_t′) и c_t′ против q_t (негативы из Q_t)"""
    shapes = {c_t.shape, c_t_prime.shape, q_t.shape, q_t_prime.shape}
    if len(shapes) != 1:
        raise LossError(f"виды различаются по числу шагов: {sorted(shapes)}")
    ids_aug = None if cluster_ids is None else cluster_ids.augmented
    ids_orig = None if cluster_ids is None else cluster_ids.original
    cross = info_nce(c_t, q_t_prime, negatives.l_cross, ids_aug, sf, kappa, step_counts)
    cross_prime = info_nce(c_t_prime, q_t, negatives.l_cross_prime, ids_orig, sf, kappa, step_counts)
    return cross, cross_prime


# ---------------------------------------------------------------------------
# Разнообразие кодов
# ---------------------------------------------------------------------------
def diversity_loss(code_probs: Tensor) -> Tensor:
    """(GV − Σ_g exp(H(p̄_g))) / (GV), p̄: средние по батчу вероятности (N, G, V)"""
    if code_probs.ndim != 3:
        raise LossError(f"ожидается (N, G, V), получено {code_probs.shape}")
    deviation = np.abs(code_probs.data.sum(axis=-1) - 1.0)
    if deviation.size and deviation.max() > NORMALIZATION_TOLERANCE:
        raise LossError(f"строки не нормированы: отклонение суммы {deviation.max():.2e}")
    _, groups, entries = code_probs.shape
    total = groups * entries
    avg = code_probs.mean(axis=0)
    perplexity = ops.exp(-ops.xlogx(avg).sum(axis=-1)).sum()
    return (total - perplexity) / float(total)


def code_perplexity(indices: np.ndarray, entries: int) -> float:
    """Перплексия средней частоты жёстких выборов, сумма по группам"""
    indices = np.asarray(indices)
    if indices.size == 0:
        return 0.0
    counts = np.stack([np.bincount(indices[:, g], minlength=entries) for g in range(indices.shape[1])])
    p = counts / indices.shape[0]
    entropy = -np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0).sum(axis=-1)
    return float(np.exp(entropy).sum())


# ---------------------------------------------------------------------------
# Итоговая функция
# ---------------------------------------------------------------------------
@dataclass
class LossInputs:
    """Дифференцируемые входы функции потерь и их разметка"""

    c_t: Tensor
    c_t_prime: Tensor
    q_t: Tensor
    q_t_prime: Tensor
    code_logits: Tensor
    code_indices: np.ndarray
    step_counts: np.ndarray

    @classmethod
    def from_outputs(cls, outputs) -> "LossInputs":
        return cls(
            c_t=outputs.c_t,
            c_t_prime=outputs.c_t_prime,
            q_t=outputs.q_t,
            q_t_prime=outputs.q_t_prime,
            code_logits=outputs.code_logits,
            code_indices=outputs.code_indices,
            step_counts=outputs.step_counts,
        )


@dataclass
class LossBreakdown:
    total: Tensor
    l_c: float
    l_cross: float
    l_cross_prime: float
    l_diversity: float
    l_total: float
    contrastive_accuracy: float
    scaled_negative_count: int
    codebook_perplexity: float

    def as_metrics(self) -> dict:
        return {
            "l_c": self.l_c,
            "l_cross": self.l_cross,
            "l_cross_prime": self.l_cross_prime,
            "l_div": self.l_diversity,
            "l_total": self.l_total,
            "contrastive_accuracy": self.contrastive_accuracy,
            "codebook_perplexity": self.codebook_perplexity,
            "scaled_negative_count": self.scaled_negative_count,
        }


def combined_loss(
    inputs: LossInputs,
    config: LossConfig,
    cluster_ids: Optional[ClusterIds],
    negatives: NegativeDraws,
) -> LossBreakdown:
    """α·L_c + β·L_cross + γ·L_cross′ + w·L_div"""
    if config.clustering.bypassed and cluster_ids is not None:
        raise LossError("CF = 1, но переданы номера кластеров")
    if not config.clustering.bypassed and cluster_ids is None:
        raise LossError(f"CF = {config.clustering.cf}, но кластеризация не выполнена")
    steps = inputs.step_counts
    ids_orig = None if cluster_ids is None else cluster_ids.original
    term_c = info_nce(inputs.c_t, inputs.q_t, negatives.l_c, ids_orig, config.sf, config.kappa, steps)
    term_cross, term_cross_prime = cross_contrastive_losses(
        inputs.c_t, inputs.c_t_prime, inputs.q_t, inputs.q_t_prime,
        negatives, cluster_ids, config.sf, config.kappa, steps,
    )
    l_div = diversity_loss(ops.softmax(inputs.code_logits, axis=-1))
    total = (
        term_c.loss * config.alpha
        + term_cross.loss * config.beta
        + term_cross_prime.loss * config.gamma
        + l_div * config.diversity_weight
    )
    return LossBreakdown(
        total=total,
        l_c=term_c.loss.item(),
        l_cross=term_cross.loss.item(),
        l_cross_prime=term_cross_prime.loss.item(),
        l_diversity=l_div.item(),
        l_total=total.item(),
        contrastive_accuracy=term_c.correct / term_c.count,
        scaled_negative_count=term_c.scaled + term_cross.scaled + term_cross_prime.scaled,
        codebook_perplexity=code_perplexity(inputs.code_indices, inputs.code_logits.shape[-1]),
    )
