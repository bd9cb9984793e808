"""Minimal reverse-mode autodiff on float64 numpy arrays."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, check_gradients, numerical_gradient
from .optim import Adam, AdamState, MissingGradError, adam_step
from .tensor import (
    DomainError,
    NonFiniteError,
    ShapeError,
    TapeConsumedError,
    Tensor,
    absolute,
    add,
    arccos,
    as_tensor,
    clamp,
    concat,
    conv2d,
    cos,
    div,
    elementwise,
    exp,
    gelu,
    getitem,
    is_grad_enabled,
    leaky_relu,
    log,
    matmul,
    mul,
    neg,
    no_grad,
    ones,
    ones_like,
    pad,
    pow_scalar,
    reduce,
    reduce_max,
    reduce_mean,
    reduce_min,
    reduce_sum,
    relu,
    reshape,
    roll,
    sigmoid,
    sin,
    softmax,
    split,
    sqrt,
    sub,
    swapaxes,
    tensor,
    transpose,
    where,
    zeros,
)
