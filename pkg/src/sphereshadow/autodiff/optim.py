"""Adam with bias-corrected moments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from .tensor import NonFiniteError, Tensor


class MissingGradError(RuntimeError):
    """A parameter handed to the optimizer has no gradient."""


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[int, np.ndarray] = field(default_factory=dict)
    v: Dict[int, np.ndarray] = field(default_factory=dict)


def adam_step(params: Sequence[Tensor], state: AdamState, lr: float) -> None:
    """Update ``params`` in place from their ``grad`` and clear the gradients.

    Moments are keyed by position in ``params``, so the same ordering must be
    used on every call. All gradients and updated values are checked for
    finiteness before anything is written.
    """
    for i, p in enumerate(params):
        if p.grad is None:
            raise MissingGradError(f"parameter {p.name or i} has no gradient")
        if not np.isfinite(p.grad).all():
            raise NonFiniteError(f"non-finite gradient for parameter {p.name or i}")

    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    updates = []
    for i, p in enumerate(params):
        g = p.grad
        m = state.m.get(i)
        v = state.v.get(i)
        m = (1.0 - b1) * g if m is None else b1 * m + (1.0 - b1) * g
        v = (1.0 - b2) * g * g if v is None else b2 * v + (1.0 - b2) * g * g
        new = p.data - lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        if not np.isfinite(new).all():
            raise NonFiniteError(f"update would make parameter {p.name or i} non-finite")
        updates.append((i, m, v, new))

    for i, m, v, new in updates:
        state.m[i] = m
        state.v[i] = v
        params[i].data = new
        params[i].grad = None
    state.step = t


class Adam:
    """Thin object wrapper around :func:`adam_step`."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params: List[Tensor] = list(params)
        self.lr = lr
        self.state = AdamState(beta1=betas[0], beta2=betas[1], eps=eps)

    def step(self) -> None:
        adam_step(self.params, self.state, self.lr)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
