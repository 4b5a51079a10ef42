from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Param


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    decay: float = 0.1
    decay_every: int = 3
    l2: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def lr_at(self, epoch: int) -> float:
        """Step-decayed learning rate for a 0-based epoch."""
        if self.decay_every <= 0:
            return self.lr
        return self.lr * self.decay ** (epoch // self.decay_every)


def init_gaussian(shape, mean=0.0, std=0.1, seed=None, rng=None, dtype=np.float64, name=None) -> Param:
    """Param with i.i.d. N(mean, std^2) entries."""
    if not shape:
        raise ValueError("shape must be non-empty")
    rng = rng if rng is not None else np.random.default_rng(seed)
    values = rng.normal(mean, std, size=tuple(shape)) if std > 0 else np.full(tuple(shape), mean)
    return Param(values.astype(dtype), name=name)


def adam_step(params, config: OptimizerConfig, epoch: int) -> float:
    """One Adam update with L2 added to the gradient. Returns the lr used."""
    lr = config.lr_at(epoch)
    b1, b2 = config.beta1, config.beta2
    for p in params:
        g = p.grad
        if config.l2:
            g = g + config.l2 * p.data
        p.step += 1
        p.m *= b1
        p.m += (1.0 - b1) * g
        p.v *= b2
        p.v += (1.0 - b2) * g * g
        m_hat = p.m / (1.0 - b1 ** p.step)
        v_hat = p.v / (1.0 - b2 ** p.step)
        p.data -= (lr * m_hat / (np.sqrt(v_hat) + config.eps)).astype(p.dtype)
    return lr


def zero_grad(params) -> None:
    for p in params:
        p.zero_grad()
