"""Независимые детерминированные потоки случайных чисел.

Каждый поток задаётся зерном и набором ключей (шаг, идентификатор клипа,
назначение), поэтому порядок обращений к одному потоку не влияет на другие.
"""
import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _key_to_int(key: Key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def make_rng(seed: int, *keys: Key) -> np.random.Generator:
    entropy = [int(seed) & 0xFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
