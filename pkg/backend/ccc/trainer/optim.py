"""Adam с раздельным затуханием весов и расписание скорости обучения."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..autodiff import Tensor
from .config import LRScheduleConfig, OptimizerConfig


def lr_at(step: int, schedule: LRScheduleConfig) -> float:
    """Скорость обучения на шаге step (шаги нумеруются с 1)"""
    if step <= 0:
        return 0.0
    if schedule.warmup_updates and step <= schedule.warmup_updates:
        return schedule.peak_lr * (step / schedule.warmup_updates)
    decay_span = schedule.total_updates - schedule.warmup_updates
    if decay_span <= 0 or step >= schedule.total_updates:
        return 0.0
    remaining = (schedule.total_updates - step) / decay_span
    return schedule.peak_lr * remaining ** schedule.power


class Adam:
    """Adam; затухание весов применяется к параметру напрямую, как в AdamW"""

    def __init__(self, params: Mapping[str, Tensor], config: OptimizerConfig):
        self.params = dict(params)
        self.config = config
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in self.params.items()}
        self.v = {name: np.zeros_like(t.data) for name, t in self.params.items()}

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def step(self, lr: float) -> None:
        self.step_count += 1
        beta1, beta2 = self.config.betas
        bias1 = 1.0 - beta1 ** self.step_count
        bias2 = 1.0 - beta2 ** self.step_count
        for name, tensor in self.params.items():
            grad = tensor.grad
            if grad is None:
                continue
            m, v = self.m[name], self.v[name]
            m *= beta1
            m += (1.0 - beta1) * grad
            v *= beta2
            v += (1.0 - beta2) * grad * grad
            if self.config.weight_decay:
                tensor.data -= (lr * self.config.weight_decay) * tensor.data
            update = (m / bias1) / (np.sqrt(v / bias2) + self.config.eps)
            tensor.data -= (lr * update).astype(tensor.dtype)

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {f"adam.m.{n}": a.copy() for n, a in self.m.items()}
        state.update({f"adam.v.{n}": a.copy() for n, a in self.v.items()})
        state["adam.step"] = np.array(self.step_count)
        return state
