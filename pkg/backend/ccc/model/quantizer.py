"""Произведение кодовых книг с выбором через Гумбель-softmax."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..autodiff import Tensor, ops
from ..errors import QuantizerError

MODES = ("gumbel", "argmax")


@dataclass
class QuantizerOutput:
    codes: Tensor          # (N, G·d_code): выбранные векторы групп подряд
    logits: Tensor         # (N, G, V)
    code_probs: Tensor     # softmax логитов до шума
    indices: np.ndarray    # (N, G)


def one_hot(indices: np.ndarray, width: int, dtype=np.float32) -> np.ndarray:
    return np.eye(width, dtype=dtype)[indices]


def gumbel_noise(shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    u = rng.random(shape)
    # u = 0 даёт бесконечность
    u = np.clip(u, np.finfo(np.float64).tiny, 1.0)
    return (-np.log(-np.log(u))).astype(dtype)


def quantize(
    logits: Tensor,
    codebook: Tensor,
    temperature: float,
    mode: str = "gumbel",
    rng: Optional[np.random.Generator] = None,
) -> QuantizerOutput:
    """Выбрать по одному вектору в каждой группе.

    logits: (N, G, V), codebook: (G, V, d_code). В режиме gumbel выбор
    жёсткий (one-hot), градиент идёт через мягкую релаксацию. В режиме
    argmax выбор детерминирован и является константой графа.
    """
    if mode not in MODES:
        raise QuantizerError(f"неизвестный режим {mode!r}")
    if logits.ndim != 3 or codebook.ndim != 3 or logits.shape[1:] != codebook.shape[:2]:
        raise QuantizerError(f"логиты {logits.shape} не соответствуют кодовой книге {codebook.shape}")
    n, groups, entries = logits.shape
    code_probs = ops.softmax(logits, axis=-1)

    if mode == "gumbel":
        if temperature <= 0:
            raise QuantizerError(f"температура {temperature} должна быть положительной")
        if rng is None:
            raise QuantizerError("режим gumbel требует генератор случайных чисел")
        noisy = logits + Tensor(gumbel_noise(logits.shape, rng, logits.dtype))
        soft = ops.softmax(noisy / float(temperature), axis=-1)
        indices = soft.data.argmax(axis=-1)
        selection = ops.straight_through(one_hot(indices, entries, logits.dtype), soft)
    else:
        indices = logits.data.argmax(axis=-1)
        selection = Tensor(one_hot(indices, entries, logits.dtype))

    # (G, N, V) @ (G, V, d) -> (G, N, d) -> (N, G·d)
    per_group = ops.matmul(selection.transpose(1, 0, 2), codebook)
    codes = per_group.transpose(1, 0, 2).reshape(n, groups * codebook.shape[-1])
    return QuantizerOutput(codes=codes, logits=logits, code_probs=code_probs, indices=indices)
