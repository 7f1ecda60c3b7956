"""Minimal float64 autodiff, complex pairs, and Adam."""
from .adam import AdamState, adam_step
from .complexmat import ComplexMatrix
from .tensor import (
    DimensionError,
    NumericError,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    div,
    exp,
    expand_dims,
    grad,
    log,
    matmul,
    mean,
    mul,
    reshape,
    set_sum,
    softmax,
    sqrt,
    square,
    stack,
    sub,
    swapaxes,
    tanh,
    transpose,
    tsum,
)

tanh_act = tanh

__all__ = [name for name in dir() if not name.startswith("_")]
