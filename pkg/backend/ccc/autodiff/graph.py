"""Граф вычислений: прямое вычисление, градиенты и проверка конечными разностями."""
from __future__ import annotations

import logging
from typing import Callable, Iterable, Mapping, Optional, Union

import numpy as np

from ..errors import GradientError, NonFiniteError
from .tensor import Tensor, no_grad, strict_mode

logger = logging.getLogger(__name__)

Outputs = Union[Tensor, Mapping[str, Tensor]]


class Graph:
    """Вычислительный граф, заданный функцией построения.

    ``build(**inputs)`` получает именованные тензоры и возвращает либо
    один тензор (выход ``"out"``), либо словарь именованных выходов.
    Порядок узлов фиксируется порядком вызовов внутри ``build``.
    """

    def __init__(self, build: Callable[..., Outputs], name: str = "graph"):
        self.build = build
        self.name = name

    def __call__(self, **inputs: Tensor) -> dict[str, Tensor]:
        result = self.build(**inputs)
        if isinstance(result, Tensor):
            return {"out": result}
        return dict(result)

    def __repr__(self) -> str:  # pragma: no cover
        return f"Graph({self.name!r})"


def _bind(inputs: Mapping[str, object], requires_grad: Iterable[str], dtype=None) -> dict[str, Tensor]:
    wanted = set(requires_grad)
    bound = {}
    for name, value in inputs.items():
        if isinstance(value, Tensor):
            data = value.data if dtype is None else value.data.astype(dtype)
        else:
            data = np.asarray(value, dtype=dtype)
        bound[name] = Tensor(data, requires_grad=name in wanted)
    return bound


def evaluate(
    graph: Graph,
    inputs: Mapping[str, object],
    *,
    requires_grad: Iterable[str] = (),
    strict: bool = False,
    dtype=None,
) -> dict[str, Tensor]:
    """Прямое вычисление всех выходов графа."""
    bound = _bind(inputs, requires_grad, dtype)
    with strict_mode(strict):
        outputs = graph(**bound)
    if strict:
        for name, value in outputs.items():
            if not np.all(np.isfinite(value.data)):
                raise NonFiniteError(f"{graph.name}: выход {name!r} содержит NaN/Inf")
    return outputs


def backward_grads(loss: Tensor, wrt: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
    """Градиенты скалярной функции по заданным листьям (нули для отсоединённых)."""
    if loss.size != 1:
        raise GradientError(f"функция потерь должна быть скаляром, получена форма {loss.shape}")
    for tensor in wrt.values():
        tensor.zero_grad()
    loss.backward()
    return {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in wrt.items()
    }


def _pick_loss(outputs: Mapping[str, Tensor], loss_node: Optional[str]) -> Tensor:
    if loss_node is not None:
        return outputs[loss_node]
    if len(outputs) != 1:
        raise GradientError(f"граф имеет выходы {sorted(outputs)}; укажите loss_node")
    return next(iter(outputs.values()))


def gradient(
    graph: Graph,
    inputs: Mapping[str, object],
    loss_node: Optional[str] = None,
    *,
    wrt: Optional[Iterable[str]] = None,
    dtype=None,
) -> dict[str, np.ndarray]:
    """Градиенты выхода ``loss_node`` по входам графа (обратный режим)."""
    names = list(inputs) if wrt is None else list(wrt)
    bound = _bind(inputs, names, dtype)
    loss = _pick_loss(graph(**bound), loss_node)
    return backward_grads(loss, {n: bound[n] for n in names})


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / scale


def grad_check_detail(
    graph: Graph,
    inputs: Mapping[str, object],
    epsilon: float = 1e-4,
    *,
    loss_node: Optional[str] = None,
    wrt: Optional[Iterable[str]] = None,
    max_coords: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> dict[str, float]:
    """Максимальная относительная ошибка градиента по каждому входу.

    Вычисления ведутся в float64. ``max_coords`` ограничивает число
    проверяемых координат на вход (выбираются случайно через ``rng``).
    """
    if epsilon <= 0:
        raise ValueError("epsilon должен быть положительным")
    base = {k: np.array(v.data if isinstance(v, Tensor) else v, dtype=np.float64) for k, v in inputs.items()}
    names = list(base) if wrt is None else list(wrt)
    analytic = gradient(graph, base, loss_node, wrt=names)

    def f(values) -> float:
        with no_grad():
            bound = _bind(values, ())
            return _pick_loss(graph(**bound), loss_node).item()

    report = {}
    for name in names:
        flat = base[name].reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort((rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False))
        worst = 0.0
        for i in coords:
            original = flat[i]
            flat[i] = original + epsilon
            plus = f(base)
            flat[i] = original - epsilon
            minus = f(base)
            flat[i] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            err = float(relative_error(np.array(analytic[name].reshape(-1)[i]), np.array(numeric)))
            worst = max(worst, err)
        report[name] = worst
        logger.debug("grad_check %s/%s: %.3e (%d координат)", graph.name, name, worst, coords.size)
    return report


def grad_check(graph: Graph, inputs: Mapping[str, object], epsilon: float = 1e-4, **kwargs) -> float:
    """max |аналитический − центральная разность| / max(|a|, |ц.р.|, 1e-8) по всем координатам"""
    report = grad_check_detail(graph, inputs, epsilon, **kwargs)
    return max(report.values()) if report else 0.0
