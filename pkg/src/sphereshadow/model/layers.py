from __future__ import annotations

from typing import Dict, Iterator, Tuple

import numpy as np

from ..autodiff import Tensor, as_tensor, matmul, reduce_mean, sqrt


class Module:
    """Parameter container. Parameters are found by walking attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for key, val in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                yield name, val
            elif isinstance(val, Module):
                yield from val.named_parameters(name + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str = "") -> None:
        own = dict(self.named_parameters())
        wanted = {k[len(prefix):]: v for k, v in state.items() if k.startswith(prefix)}
        missing = set(own) - set(wanted)
        extra = set(wanted) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in own.items():
            arr = np.asarray(wanted[name], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {arr.shape} vs {p.shape}")
            p.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


def param(arr: np.ndarray) -> Tensor:
    return Tensor(arr, requires_grad=True)


def trunc_normal(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out


class Linear(Module):
    def __init__(self, fan_in: int, fan_out: int, rng: np.random.Generator, std: float | None = None):
        std = fan_in**-0.5 if std is None else std
        self.weight = param(trunc_normal(rng, (fan_in, fan_out), std))
        self.bias = param(np.zeros(fan_out))

    def __call__(self, x) -> Tensor:
        return matmul(as_tensor(x), self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.weight = param(np.ones(dim))
        self.bias = param(np.zeros(dim))
        self.eps = eps

    def __call__(self, x) -> Tensor:
        x = as_tensor(x)
        xc = x - reduce_mean(x, axis=-1, keepdims=True)
        var = reduce_mean(xc * xc, axis=-1, keepdims=True)
        return xc / sqrt(var + self.eps) * self.weight + self.bias
