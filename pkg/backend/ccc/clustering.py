"""Кластеризация квантованных целей k-means с косинусным расстоянием.

Для каждого фрагмента батча число кластеров k = ceil(NF/CF); CF = 1
отключает модуль. Результат: номера кластеров для каждого замаскированного
шага, по которым функция потерь находит негативы из кластера позитива.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.cluster import kmeans_plusplus

from .autodiff.ops import COSINE_EPS
from .configbase import ConfigSection
from .errors import ClusteringError
from .seeding import make_rng

logger = logging.getLogger(__name__)

K_SOURCES = ("pooled", "single")
MAX_ITERATIONS = 100


@dataclass
class ClusterConfig(ConfigSection):
    section_name = "clustering"

    cf: int = 1
    max_iterations: int = MAX_ITERATIONS
    pooled: bool = False
    pooled_k_source: str = "pooled"
    seed: int = 0

    @property
    def bypassed(self) -> bool:
        return self.cf == 1

    def problems(self) -> list[str]:
        found = []
        if self.cf < 1:
            found.append(f"cf={self.cf} (нужно >= 1)")
        if self.max_iterations < 1:
            found.append(f"max_iterations={self.max_iterations}")
        if self.pooled_k_source not in K_SOURCES:
            found.append(f"pooled_k_source={self.pooled_k_source!r} (допустимо {', '.join(K_SOURCES)})")
        return found


@dataclass
class ClusterAssignment:
    assignments: np.ndarray
    centroids: np.ndarray
    k: int
    inertia: float
    inertia_history: list = field(default_factory=list)
    iterations: int = 0
    repaired: int = 0


@dataclass
class ClusterIds:
    """Номера кластеров по развёрнутым замаскированным шагам каждого вида"""

    original: np.ndarray
    augmented: np.ndarray
    ks: list = field(default_factory=list)


def num_clusters(nf: int, cf: int, points: Optional[int] = None) -> Optional[int]:
    """k = ceil(nf/cf), не больше числа точек; None при cf = 1"""
    if nf < 1 or cf < 1:
        raise ClusteringError(f"NF={nf}, CF={cf}: оба должны быть >= 1")
    if cf == 1:
        return None
    k = math.ceil(nf / cf)
    if points is not None:
        k = min(k, points)
    return k


def _unit_rows(points: np.ndarray) -> np.ndarray:
    norms = np.sqrt((points * points).sum(axis=1, keepdims=True))
    return points / (norms + COSINE_EPS)


def kmeans_cosine(
    points: np.ndarray,
    k: int,
    max_iterations: int = MAX_ITERATIONS,
    rng: Optional[np.random.Generator] = None,
) -> ClusterAssignment:
    """Сферический k-means: инициализация k-means++, центроиды равны нормированным суммам.

    На последней итерации обновление центроидов не выполняется, поэтому
    возвращённые номера всегда указывают ближайший центроид.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ClusteringError(f"ожидается непустая матрица точек, получена форма {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ClusteringError(f"k={k} вне [1, {n}]")
    if max_iterations < 1:
        raise ClusteringError(f"max_iterations={max_iterations}")
    rng = rng or np.random.default_rng(0)
    unit = _unit_rows(points)
    # на единичной сфере квадрат евклидова расстояния равен 2·(1 − cos)
    _, seeds = kmeans_plusplus(unit, n_clusters=k, random_state=int(rng.integers(2**31 - 1)))
    centroids = unit[seeds].copy()

    history: list[float] = []
    labels: Optional[np.ndarray] = None
    repaired = 0
    iteration = 0
    for iteration in range(1, max_iterations + 1):
        sims = unit @ centroids.T
        new_labels = sims.argmax(axis=1)
        history.append(float((1.0 - sims[np.arange(n), new_labels]).sum()))
        converged = labels is not None and np.array_equal(new_labels, labels)
        labels = new_labels
        if converged or iteration == max_iterations:
            break
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, unit)
        centroids = _unit_rows(sums)
        repaired += _repair_empty(unit, labels, centroids, k)

    if repaired:
        logger.warning("k-means: восстановлено пустых кластеров: %d (k=%d, n=%d)", repaired, k, n)
    return ClusterAssignment(
        assignments=labels,
        centroids=centroids,
        k=k,
        inertia=history[-1],
        inertia_history=history,
        iterations=iteration,
        repaired=repaired,
    )


def _repair_empty(unit: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int) -> int:
    """Пустой кластер получает самую далёкую от своего центроида точку"""
    repaired = 0
    for j in range(k):
        sizes = np.bincount(labels, minlength=k)
        if sizes[j]:
            continue
        donors = sizes[labels] > 1
        distance = 1.0 - (unit * centroids[labels]).sum(axis=1)
        farthest = int(np.argmax(np.where(donors, distance, -np.inf)))
        centroids[j] = unit[farthest]
        labels[farthest] = j
        repaired += 1
    return repaired


def same_cluster_mask(
    assignment: Union[ClusterAssignment, np.ndarray],
    positive_index: int,
    negative_indices: Sequence[int],
) -> np.ndarray:
    ids = assignment.assignments if isinstance(assignment, ClusterAssignment) else np.asarray(assignment)
    negative_indices = np.asarray(negative_indices, dtype=np.int64)
    n = ids.shape[0]
    if not 0 <= positive_index < n or (
        negative_indices.size and (negative_indices.min() < 0 or negative_indices.max() >= n)
    ):
        raise ClusteringError(f"индекс вне диапазона [0, {n})")
    return ids[negative_indices] == ids[positive_index]


def cluster_batch(
    q_t: np.ndarray,
    q_t_prime: np.ndarray,
    step_counts: Sequence[int],
    num_frames: int,
    config: ClusterConfig,
    step: int = 0,
) -> Optional[ClusterIds]:
    """Кластеризация каждого фрагмента батча заново; None, если CF = 1."""
    if config.bypassed:
        return None
    q_t = np.asarray(q_t)
    q_t_prime = np.asarray(q_t_prime)
    if q_t.shape != q_t_prime.shape:
        raise ClusteringError(f"формы Q_t {q_t.shape} и Q_t′ {q_t_prime.shape} различаются")
    original = np.zeros(q_t.shape[0], dtype=np.int64)
    augmented = np.zeros(q_t.shape[0], dtype=np.int64)
    ks = []
    offset = 0
    for utt, count in enumerate(step_counts):
        rows = slice(offset, offset + int(count))
        offset += int(count)
        if config.pooled:
            nf = 2 * num_frames if config.pooled_k_source == "pooled" else num_frames
            points = np.concatenate([q_t[rows], q_t_prime[rows]])
            k = num_clusters(nf, config.cf, points.shape[0])
            result = kmeans_cosine(points, k, config.max_iterations, make_rng(config.seed, "kmeans", step, utt))
            original[rows] = result.assignments[: int(count)]
            augmented[rows] = result.assignments[int(count) :]
            ks.append(k)
            continue
        for view, target, values in (("original", original, q_t), ("augmented", augmented, q_t_prime)):
            points = values[rows]
            k = num_clusters(num_frames, config.cf, points.shape[0])
            result = kmeans_cosine(points, k, config.max_iterations, make_rng(config.seed, "kmeans", step, utt, view))
            target[rows] = result.assignments
            ks.append(k)
    if offset != q_t.shape[0]:
        raise ClusteringError(f"сумма шагов {offset} не равна числу целей {q_t.shape[0]}")
    logger.debug("кластеризация шага %d: k=%s", step, ks)
    return ClusterIds(original=original, augmented=augmented, ks=ks)
