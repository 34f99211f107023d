"""Minimal reverse-mode differentiation over dense numpy arrays."""

from .functions import (
    abs,
    add,
    as_tensor,
    bilinear_sample,
    channel_softmax,
    concatenate,
    conv2d,
    hinge,
    log,
    matmul,
    mean,
    mul,
    relu,
    reshape,
    select,
    stack,
    sub,
    sum,
    tanh,
    transpose,
)
from .gradcheck import GradCheckResult, finite_diff_check
from .tensor import (
    KINK_TOLERANCE,
    Array,
    Tape,
    Tensor,
    backward,
    current_tape,
    no_grad,
)

__all__ = [
    "KINK_TOLERANCE",
    "Array",
    "GradCheckResult",
    "Tape",
    "Tensor",
    "abs",
    "add",
    "as_tensor",
    "backward",
    "bilinear_sample",
    "channel_softmax",
    "concatenate",
    "conv2d",
    "current_tape",
    "finite_diff_check",
    "hinge",
    "log",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "select",
    "stack",
    "sub",
    "sum",
    "tanh",
    "transpose",
]
