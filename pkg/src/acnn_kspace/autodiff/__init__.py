"""Reverse-mode automatic differentiation on numpy arrays."""

from . import functional
from .gradcheck import grad_check
from .nn import Module
from .optim import AdamState, adam_step, lr_schedule
from .tensor import GraphError, Parameter, Tensor

__all__ = [
    "AdamState",
    "GraphError",
    "Module",
    "Parameter",
    "Tensor",
    "adam_step",
    "functional",
    "grad_check",
    "lr_schedule",
]
