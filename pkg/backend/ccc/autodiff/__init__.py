"""Минимальное ядро обратного дифференцирования над массивами numpy."""
from . import ops
from .graph import Graph, backward_grads, evaluate, grad_check, grad_check_detail, gradient, relative_error
from .tensor import Tensor, as_tensor, grad_enabled, is_strict, no_grad, strict_mode

__all__ = [
    "Graph",
    "Tensor",
    "as_tensor",
    "backward_grads",
    "evaluate",
    "grad_check",
    "grad_check_detail",
    "grad_enabled",
    "gradient",
    "is_strict",
    "no_grad",
    "ops",
    "relative_error",
    "strict_mode",
]
