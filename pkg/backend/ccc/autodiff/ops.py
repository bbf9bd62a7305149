"""Примитивы с ручными правилами обратного прохода.

Все операции работают с float32/float64 и сохраняют dtype входов.
Дискретные выборы (индексы, маски, one-hot) передаются как обычные
массивы numpy и в обратном проходе считаются константами.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf, xlogy

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, make_node

COSINE_EPS = 1e-8


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise ShapeError(f"{op}: несовместимые формы {a.shape} и {b.shape}") from exc


# ---------------------------------------------------------------------------
# Поэлементная арифметика
# ---------------------------------------------------------------------------
def add(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    _broadcast_check("add", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return make_node(a.data + b.data, (a, b), backward, "add")


def sub(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    _broadcast_check("sub", a, b)

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return make_node(a.data - b.data, (a, b), backward, "sub")


def neg(a: Tensor) -> Tensor:
    return make_node(-a.data, (a,), lambda g: (-g,), "neg")


def mul(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    _broadcast_check("mul", a, b)

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return make_node(a.data * b.data, (a, b), backward, "mul")


def div(a, b) -> Tensor:
    a = as_tensor(a, like=b if isinstance(b, Tensor) else None)
    b = as_tensor(b, like=a)
    _broadcast_check("div", a, b)
    out = a.data / b.data

    def backward(g):
        return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

    return make_node(out, (a, b), backward, "div")


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_node(out, (a,), lambda g: (g * out,), "exp")


def log(a: Tensor) -> Tensor:
    return make_node(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def xlogx(a: Tensor) -> Tensor:
    """x·log x с доопределением 0·log 0 = 0"""
    out = xlogy(a.data, a.data).astype(a.dtype)

    def backward(g):
        positive = a.data > 0
        safe = np.where(positive, a.data, 1.0)
        return (np.where(positive, g * (np.log(safe) + 1.0), 0.0).astype(a.dtype),)

    return make_node(out, (a,), backward, "xlogx")


def gelu(a: Tensor) -> Tensor:
    """Точный GELU: x·Φ(x)"""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    out = (x * cdf).astype(a.dtype)

    def backward(g):
        pdf = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        return ((g * (cdf + x * pdf)).astype(a.dtype),)

    return make_node(out, (a,), backward, "gelu")


# ---------------------------------------------------------------------------
# Редукции и перестановки
# ---------------------------------------------------------------------------
def _normalize_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(sorted(a % ndim for a in axis))


def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - имя как у numpy
    axes = _normalize_axes(axis, a.ndim)
    out = np.sum(a.data, axis=axes, keepdims=keepdims)

    def backward(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_node(out, (a,), backward, "sum")


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _normalize_axes(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    return div(sum(a, axis=axes, keepdims=keepdims), float(count))


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: нельзя привести {a.shape} к {tuple(shape)}") from exc
    return make_node(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_node(a.data.transpose(axes), (a,), lambda g: (g.transpose(inverse),), "transpose")


def getitem(a: Tensor, key) -> Tensor:
    out = a.data[key]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, key, g)
        return (full,)

    return make_node(np.array(out, copy=True), (a,), backward, "gather")


def gather_rows(a: Tensor, index: np.ndarray) -> Tensor:
    """Выбор строк по целочисленным индексам произвольной формы"""
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= a.shape[0]):
        raise ShapeError(f"gather: индекс вне диапазона [0, {a.shape[0]})")
    out = a.data[index]

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index.reshape(-1), g.reshape((-1,) + a.shape[1:]))
        return (full,)

    return make_node(out, (a,), backward, "gather")


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = list(tensors)
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concatenate: {exc}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(out, tensors, backward, "concatenate")


# ---------------------------------------------------------------------------
# Линейная алгебра
# ---------------------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: нужны операнды ранга >= 2, получены {a.shape} и {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: внутренние размерности {a.shape} и {b.shape} не совпадают")
    out = np.matmul(a.data, b.data)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        if b.ndim == 2:
            k, m = b.shape
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, m)
        else:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(out, (a, b), backward, "matmul")


def conv1d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, *, stride: int = 1, padding: int = 0) -> Tensor:
    """Одномерная свёртка по времени.

    x: (B, T, C_in), weight: (K, C_in, C_out), bias: (C_out,).
    """
    if x.ndim != 3 or weight.ndim != 3 or x.shape[2] != weight.shape[1]:
        raise ShapeError(f"conv1d: формы входа {x.shape} и ядра {weight.shape} несовместимы")
    width, c_in, c_out = weight.shape
    data = x.data
    if padding:
        data = np.pad(data, ((0, 0), (padding, padding), (0, 0)))
    padded_len = data.shape[1]
    if padded_len < width:
        raise ShapeError(f"conv1d: длина {padded_len} меньше ширины ядра {width}")
    t_out = (padded_len - width) // stride + 1
    windows = sliding_window_view(data, width, axis=1)[:, : (t_out - 1) * stride + 1 : stride]
    # (B, T_out, C_in, K) -> (B, T_out, K·C_in), порядок как у weight.reshape
    cols = np.ascontiguousarray(windows.transpose(0, 1, 3, 2)).reshape(data.shape[0], t_out, width * c_in)
    w2 = weight.data.reshape(width * c_in, c_out)
    out = cols @ w2
    if bias is not None:
        out = out + bias.data

    def backward(g):
        dcols = (g @ w2.T).reshape(data.shape[0], t_out, width, c_in)
        dw = (cols.reshape(-1, width * c_in).T @ g.reshape(-1, c_out)).reshape(weight.shape)
        dx = np.zeros_like(data)
        span = (t_out - 1) * stride + 1
        for k in range(width):
            dx[:, k : k + span : stride, :] += dcols[:, :, k, :]
        if padding:
            dx = dx[:, padding:-padding, :]
        grads = [dx, dw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return tuple(grads)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, backward, "conv1d")


# ---------------------------------------------------------------------------
# Нормализация, softmax, сходство
# ---------------------------------------------------------------------------
def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_node(out, (a,), backward, "softmax")


def masked_logsumexp(a: Tensor, keep: np.ndarray, axis: int = -1) -> Tensor:
    """log Σ exp(a) только по элементам с keep=True (без бесконечностей)"""
    keep = np.broadcast_to(np.asarray(keep, dtype=bool), a.shape)
    if not np.all(keep.any(axis=axis)):
        raise ShapeError("masked_logsumexp: в строке нет ни одного учитываемого элемента")
    floor = np.finfo(a.dtype).min
    peak = np.where(keep, a.data, floor).max(axis=axis, keepdims=True)
    e = np.exp(np.where(keep, a.data - peak, 0.0)) * keep
    total = e.sum(axis=axis, keepdims=True)
    out = (peak + np.log(total)).squeeze(axis)

    def backward(g):
        return (np.expand_dims(g, axis) * e / total,)

    return make_node(out.astype(a.dtype), (a,), backward, "logsumexp")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Нормализация по последней оси"""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(f"layer_norm: параметры {gamma.shape}/{beta.shape} не подходят к входу {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = centered * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        dxhat = g * gamma.data
        dx = rstd * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        lead = tuple(range(x.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_node(out.astype(x.dtype), (x, gamma, beta), backward, "layer_norm")


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """a·b / ((|a|+1e-8)(|b|+1e-8)) с бродкастингом по остальным осям"""
    _broadcast_check("cosine_similarity", a, b)
    na = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    nb = np.sqrt((b.data * b.data).sum(axis=axis, keepdims=True))
    da, db = na + COSINE_EPS, nb + COSINE_EPS
    dot = (a.data * b.data).sum(axis=axis, keepdims=True)
    out = dot / (da * db)

    def backward(g):
        g = np.expand_dims(g, axis)
        inv_na = np.where(na > 0, 1.0 / np.where(na > 0, na, 1.0), 0.0)
        inv_nb = np.where(nb > 0, 1.0 / np.where(nb > 0, nb, 1.0), 0.0)
        ga = g * (b.data / (da * db) - out / da * a.data * inv_na)
        gb = g * (a.data / (da * db) - out / db * b.data * inv_nb)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_node(out.squeeze(axis), (a, b), backward, "cosine_similarity")


def l2_normalize(a: Tensor, axis: int = -1) -> Tensor:
    """a / (|a| + 1e-8); произведение двух таких векторов равно cosine_similarity"""
    n = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    d = n + COSINE_EPS
    out = a.data / d

    def backward(g):
        inv_n = np.where(n > 0, 1.0 / np.where(n > 0, n, 1.0), 0.0)
        proj = (g * a.data).sum(axis=axis, keepdims=True)
        return (g / d - a.data * proj * inv_n / (d * d),)

    return make_node(out, (a,), backward, "l2_normalize")


# ---------------------------------------------------------------------------
# Дискретные выборы
# ---------------------------------------------------------------------------
def straight_through(hard: np.ndarray, soft: Tensor) -> Tensor:
    """Значение от hard, градиент от soft"""
    if hard.shape != soft.shape:
        raise ShapeError(f"straight_through: формы {hard.shape} и {soft.shape} различаются")
    return make_node(np.asarray(hard, dtype=soft.dtype), (soft,), lambda g: (g,), "straight_through")


def replace_rows(x: Tensor, mask: np.ndarray, fill: Tensor) -> Tensor:
    """Заменить векторы x[..., t, :] на fill там, где mask[..., t] истинно"""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape[:-1] or fill.shape != (x.shape[-1],):
        raise ShapeError(f"replace_rows: маска {mask.shape} / заполнитель {fill.shape} не подходят к {x.shape}")
    m = mask[..., None]
    out = np.where(m, fill.data, x.data)

    def backward(g):
        return np.where(m, 0.0, g).astype(x.dtype), (g * m).reshape(-1, x.shape[-1]).sum(axis=0)

    return make_node(out, (x, fill), backward, "replace_rows")


# ---------------------------------------------------------------------------
# Операторы Tensor
# ---------------------------------------------------------------------------
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(other, self)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: sub(other, self)
Tensor.__neg__ = lambda self: neg(self)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(other, self)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__matmul__ = lambda self, other: matmul(self, other)
Tensor.__getitem__ = lambda self, key: getitem(self, key)
Tensor.sum = lambda self, axis=None, keepdims=False: sum(self, axis, keepdims)
Tensor.mean = lambda self, axis=None, keepdims=False: mean(self, axis, keepdims)
Tensor.reshape = lambda self, *shape: reshape(self, shape[0] if len(shape) == 1 and not isinstance(shape[0], int) else shape)
Tensor.transpose = lambda self, *axes: transpose(self, axes[0] if len(axes) == 1 and not isinstance(axes[0], int) else axes)
Tensor.exp = lambda self: exp(self)
Tensor.log = lambda self: log(self)
