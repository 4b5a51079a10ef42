"""Minimal dense reverse-mode differentiation on top of numpy."""
from .optim import OptimizerConfig, adam_step, init_gaussian, zero_grad
from .tensor import (
    NonFiniteError,
    Param,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    dropout,
    embedding,
    expand,
    gather_rows,
    index,
    inner,
    linear,
    log,
    matmul,
    mean,
    mul,
    pick,
    relu,
    reshape,
    scatter_add,
    set_mean,
    sigmoid,
    softmax,
    sub,
    sum_,
    tanh,
    transpose,
    where,
)
