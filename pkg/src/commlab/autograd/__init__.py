"""Reverse-mode automatic differentiation over numpy arrays."""

from . import kernels, ops
from .tensor import (
    ContractError,
    DimensionError,
    DomainError,
    Tape,
    Tensor,
    as_tensor,
    backward,
    default_dtype,
    get_default_dtype,
    grad_enabled,
    no_grad,
    set_default_dtype,
)

__all__ = [
    "ContractError", "DimensionError", "DomainError", "Tape", "Tensor", "as_tensor",
    "backward", "default_dtype", "get_default_dtype", "grad_enabled", "kernels",
    "no_grad", "ops", "set_default_dtype",
]
