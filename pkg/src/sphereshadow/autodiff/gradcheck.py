"""Central finite-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class GradCheckResult:
    max_rel_error: float
    norm_rel_error: float
    checked: int
    analytic: List[np.ndarray]
    numeric: List[np.ndarray]

    def passed(self, rtol: float, norm: bool = False) -> bool:
        """Elementwise test by default; ``norm`` compares whole gradient vectors instead.

        The norm-wise test suits gradients with many entries near 1e-7, where the
        rounding noise of the difference quotient (about ``eps * |f| / step``)
        is itself a sizeable fraction of the entry.
        """
        return (self.norm_rel_error if norm else self.max_rel_error) <= rtol


def numerical_gradient(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], step: float = 1e-5) -> List[np.ndarray]:
    """Central differences of the scalar ``fn(*Tensors)`` w.r.t. every input entry."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    grads = []
    for k, arr in enumerate(arrays):
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = fn(*[Tensor(a) for a in arrays]).item()
            flat[i] = orig - step
            lo = fn(*[Tensor(a) for a in arrays]).item()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def analytic_gradient(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray]) -> List[np.ndarray]:
    ts = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*ts)
    out.backward()
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in ts]


def check_gradients(
    fn: Callable[..., Tensor],
    arrays: Sequence[np.ndarray],
    step: float = 1e-5,
    floor: float = 1e-8,
) -> GradCheckResult:
    """Compare backprop against central differences.

    The elementwise relative error ``|a - n| / max(|a|, |n|)`` is taken over
    entries where ``|a| > floor``; entries below the floor must instead agree
    in absolute terms to ``floor``.
    """
    ana = analytic_gradient(fn, arrays)
    num = numerical_gradient(fn, arrays, step)
    worst = 0.0
    checked = 0
    diff_sq = ref_sq = 0.0
    for a, n in zip(ana, num):
        diff = np.abs(a - n)
        big = np.abs(a) > floor
        if big.any():
            rel = diff[big] / np.maximum(np.abs(a[big]), np.abs(n[big]))
            worst = max(worst, float(rel.max()))
            checked += int(big.sum())
        small = ~big
        if small.any() and float(diff[small].max()) > floor:
            worst = max(worst, float(diff[small].max()))
        diff_sq += float((diff**2).sum())
        ref_sq += float((np.maximum(np.abs(a), np.abs(n)) ** 2).sum())
    norm_rel = np.sqrt(diff_sq / ref_sq) if ref_sq > 0 else np.sqrt(diff_sq)
    return GradCheckResult(worst, float(norm_rel), checked, ana, num)
