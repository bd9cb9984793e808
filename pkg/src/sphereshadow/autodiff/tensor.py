"""Dense float64 tensor with reverse-mode automatic differentiation.

Every differentiable operation records its inputs and a backward rule on the
output tensor. Calling :meth:`Tensor.backward` on a scalar walks that record in
reverse topological order, accumulates gradients into leaf tensors and then
releases the record, so each recorded graph (the "tape") supports exactly one
backward pass.

Broadcasting follows numpy's trailing-dimension rule for every elementwise op.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import erf

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]

_GRAD_ENABLED = True
_ARCCOS_TOL = 1e-12
_SQRT_2PI = np.sqrt(2.0 * np.pi)


class DomainError(ValueError):
    """Raised when an operation is evaluated outside its mathematical domain."""


class NonFiniteError(FloatingPointError):
    """Raised when a value or gradient would become NaN or infinite."""


class ShapeError(ValueError):
    """Raised on incompatible operand shapes."""


class TapeConsumedError(RuntimeError):
    """Raised when backward is called twice through the same recorded graph."""


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def is_grad_enabled() -> bool:
    return _GRAD_ENABLED


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite values produced by {what}")


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape``, undoing trailing-dimension broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: Tuple[int, ...], b: Tuple[int, ...]) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a, b)
    except ValueError as exc:
        raise ShapeError(f"shapes {a} and {b} are not broadcast-compatible") from exc


class Tensor:
    """N-dimensional float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed", "name")
    __array_priority__ = 100.0

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.array(data, dtype=np.float64)
        _check_finite(arr, "Tensor construction")
        self.data = arr
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self._parents: Tuple[Tensor, ...] = ()
        self._backward = None
        self._consumed = False
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Tuple["Tensor", ...], backward, what: str) -> "Tensor":
        _check_finite(data, what)
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out.name = None
        out._consumed = False
        if _GRAD_ENABLED and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None and not self._consumed

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.grad = None
        out.requires_grad = False
        out._parents = ()
        out._backward = None
        out._consumed = False
        out.name = None
        return out

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # --------------------------------------------------------------- operators
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_scalar(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # ------------------------------------------------------------ method forms
    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def max(self, axis=None, keepdims=False):
        return reduce_max(self, axis, keepdims)

    def min(self, axis=None, keepdims=False):
        return reduce_min(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return transpose(self, None)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def abs(self):
        return absolute(self)

    # ---------------------------------------------------------------- backward
    def backward(self) -> None:
        """Populate ``grad`` on every reachable leaf that requires gradients."""
        if self._consumed:
            raise TapeConsumedError("tape already consumed by a previous backward pass")
        if self.data.size != 1:
            raise ShapeError(f"backward requires a scalar root, got shape {self.shape}")
        if not self.requires_grad:
            raise RuntimeError("backward root does not require grad")

        order = _topological_order(self)
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                _check_finite(pg, "backward pass")
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        for node in order:
            if node._backward is not None:
                node._parents = ()
                node._backward = None
                node._consumed = True


def _topological_order(root: Tensor) -> list:
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))
    return order


def as_tensor(x: ArrayLike) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def tensor(data: ArrayLike, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def zeros(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=requires_grad)


def ones(shape, requires_grad: bool = False) -> Tensor:
    return Tensor(np.ones(shape), requires_grad=requires_grad)


def ones_like(x: Tensor) -> Tensor:
    return Tensor(np.ones_like(x.data))


# ---------------------------------------------------------------------------
# elementwise
# ---------------------------------------------------------------------------


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(
        a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add"
    )


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    sa, sb = a.shape, b.shape
    return Tensor._from_op(
        a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub"
    )


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data

    def backward(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return Tensor._from_op(ad * bd, (a, b), backward, "mul")


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape(a.shape, b.shape)
    ad, bd = a.data, b.data
    if np.any(bd == 0.0):
        raise DomainError("division by zero")
    out = ad / bd

    def backward(g):
        return (
            _unbroadcast(g / bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(-g * out / bd, bd.shape) if b.requires_grad else None,
        )

    return Tensor._from_op(out, (a, b), backward, "div")


def neg(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,), "neg")


def exp(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,), "exp")


def log(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    if np.any(x <= 0.0):
        raise DomainError("log of a non-positive value")
    return Tensor._from_op(np.log(x), (a,), lambda g: (g / x,), "log")


def sqrt(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    if np.any(x < 0.0):
        raise DomainError("sqrt of a negative value")
    out = np.sqrt(x)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g * 0.5 / out,)

    return Tensor._from_op(out, (a,), backward, "sqrt")


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor._from_op(np.sin(x), (a,), lambda g: (g * np.cos(x),), "sin")


def cos(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor._from_op(np.cos(x), (a,), lambda g: (-g * np.sin(x),), "cos")


def arccos(a: ArrayLike) -> Tensor:
    """Inverse cosine; inputs within 1e-12 outside [-1, 1] are clamped."""
    a = as_tensor(a)
    x = a.data
    if np.any(np.abs(x) > 1.0 + _ARCCOS_TOL):
        raise DomainError("arccos argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (-g / np.sqrt(1.0 - x * x),)

    return Tensor._from_op(np.arccos(x), (a,), backward, "arccos")


def absolute(a: ArrayLike) -> Tensor:
    """|x|; the subgradient at 0 is 0."""
    a = as_tensor(a)
    x = a.data
    return Tensor._from_op(np.abs(x), (a,), lambda g: (g * np.sign(x),), "abs")


def pow_scalar(a: ArrayLike, p: float) -> Tensor:
    a = as_tensor(a)
    x = a.data
    p = float(p)
    if not p.is_integer() and np.any(x < 0.0):
        raise DomainError("fractional power of a negative value")
    if p < 0 and np.any(x == 0.0):
        raise DomainError("negative power of zero")

    def backward(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (g * p * np.power(x, p - 1.0),)

    return Tensor._from_op(np.power(x, p), (a,), backward, "pow")


def relu(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    return Tensor._from_op(np.maximum(x, 0.0), (a,), lambda g: (g * (x > 0.0),), "relu")


def leaky_relu(a: ArrayLike, slope: float = 0.2) -> Tensor:
    a = as_tensor(a)
    x = a.data
    pos = x > 0.0
    return Tensor._from_op(
        np.where(pos, x, slope * x), (a,), lambda g: (np.where(pos, g, slope * g),), "leaky_relu"
    )


def gelu(a: ArrayLike) -> Tensor:
    """Exact GELU, x * Phi(x)."""
    a = as_tensor(a)
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))

    def backward(g):
        pdf = np.exp(-0.5 * x * x) / _SQRT_2PI
        return (g * (cdf + x * pdf),)

    return Tensor._from_op(x * cdf, (a,), backward, "gelu")


def sigmoid(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Tensor._from_op(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def clamp(a: ArrayLike, lo: Optional[float] = None, hi: Optional[float] = None) -> Tensor:
    """Clip to [lo, hi]; gradient is zero where the bound is active."""
    a = as_tensor(a)
    x = a.data
    out = np.clip(x, lo, hi)
    inside = np.ones(x.shape, dtype=bool)
    if lo is not None:
        inside &= x >= lo
    if hi is not None:
        inside &= x <= hi
    return Tensor._from_op(out, (a,), lambda g: (g * inside,), "clamp")


def where(cond, a: ArrayLike, b: ArrayLike) -> Tensor:
    """Select ``a`` where ``cond`` holds, else ``b``. Gradients are masked accordingly."""
    a, b = as_tensor(a), as_tensor(b)
    cond = np.asarray(cond.data if isinstance(cond, Tensor) else cond, dtype=bool)
    sa, sb = a.shape, b.shape

    def backward(g):
        return (
            _unbroadcast(np.where(cond, g, 0.0), sa) if a.requires_grad else None,
            _unbroadcast(np.where(cond, 0.0, g), sb) if b.requires_grad else None,
        )

    return Tensor._from_op(np.where(cond, a.data, b.data), (a, b), backward, "where")


_UNARY = {
    "neg": neg,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "arccos": arccos,
    "abs": absolute,
    "relu": relu,
    "gelu": gelu,
}
_BINARY = {"add": add, "sub": sub, "mul": mul, "div": div}


def elementwise(kind: str, a: ArrayLike, b=None) -> Tensor:
    """Dispatch an elementwise op by name (``pow-scalar`` takes the exponent as ``b``)."""
    if kind in _BINARY:
        if b is None:
            raise ValueError(f"{kind} needs two operands")
        return _BINARY[kind](a, b)
    if kind in _UNARY:
        return _UNARY[kind](a)
    if kind in ("pow-scalar", "pow"):
        return pow_scalar(a, b)
    raise ValueError(f"unknown elementwise op {kind!r}")


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product with numpy batching rules over leading dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ShapeError("matmul operands must be at least 1-D")
    if a.ndim == 1:
        return reshape(matmul(reshape(a, (1, a.shape[0])), b), _squeeze_shape(b, -2))
    if b.ndim == 1:
        return reshape(matmul(a, reshape(b, (b.shape[0], 1))), a.shape[:-1])
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    try:
        out = np.matmul(ad, bd)
    except ValueError as exc:
        raise ShapeError(f"matmul batch dimensions differ: {a.shape} @ {b.shape}") from exc

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(bd, -1, -2)), ad.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(ad, -1, -2), g), bd.shape)
        return ga, gb

    return Tensor._from_op(out, (a, b), backward, "matmul")


def _squeeze_shape(b: Tensor, axis: int) -> Tuple[int, ...]:
    shape = list(b.shape)
    del shape[axis]
    return tuple(shape)


# ---------------------------------------------------------------------------
# reductions
# ---------------------------------------------------------------------------


def _norm_axes(axis, ndim: int) -> Tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    out = []
    for ax in axis:
        if not -ndim <= ax < ndim:
            raise ShapeError(f"axis {ax} out of range for {ndim}-D tensor")
        out.append(ax % ndim)
    if len(set(out)) != len(out):
        raise ShapeError("repeated axis in reduction")
    return tuple(sorted(out))


def _expand_reduced(g: np.ndarray, shape: Tuple[int, ...], axes: Tuple[int, ...], keepdims: bool):
    if not keepdims:
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def reduce_sum(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape
    return Tensor._from_op(
        a.data.sum(axis=axes, keepdims=keepdims),
        (a,),
        lambda g: (_expand_reduced(g, shape, axes, keepdims),),
        "sum",
    )


def reduce_mean(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    shape = a.shape
    count = 1
    for ax in axes:
        count *= shape[ax]
    if count == 0:
        raise ShapeError("mean over an empty selection")
    return Tensor._from_op(
        a.data.mean(axis=axes, keepdims=keepdims),
        (a,),
        lambda g: (_expand_reduced(g / count, shape, axes, keepdims),),
        "mean",
    )


def reduce_max(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    """Maximum over ``axis``. On ties the gradient goes to the first maximal element."""
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    x = a.data
    keep = [ax for ax in range(a.ndim) if ax not in axes]
    perm = keep + list(axes)
    xt = np.transpose(x, perm)
    kept_shape = xt.shape[: len(keep)]
    flat = xt.reshape(kept_shape + (-1,))
    if flat.shape[-1] == 0:
        raise ShapeError("max over an empty selection")
    idx = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    if keepdims:
        out = np.expand_dims(out, axes)

    def backward(g):
        if keepdims:
            g = np.squeeze(g, axis=axes)
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, idx[..., None], np.asarray(g)[..., None], axis=-1)
        gt = gflat.reshape(xt.shape)
        return (np.transpose(gt, np.argsort(perm)),)

    return Tensor._from_op(np.asarray(out, dtype=np.float64), (a,), backward, "max")


def reduce_min(a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    return neg(reduce_max(neg(a), axis, keepdims))


def reduce(kind: str, a: ArrayLike, axis=None, keepdims: bool = False) -> Tensor:
    ops = {"sum": reduce_sum, "mean": reduce_mean, "max": reduce_max, "min": reduce_min}
    if kind not in ops:
        raise ValueError(f"unknown reduction {kind!r}")
    return ops[kind](a, axis, keepdims)


# ---------------------------------------------------------------------------
# shape manipulation
# ---------------------------------------------------------------------------


def reshape(a: ArrayLike, shape) -> Tensor:
    a = as_tensor(a)
    src = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {src} to {shape}") from exc
    return Tensor._from_op(out, (a,), lambda g: (g.reshape(src),), "reshape")


def transpose(a: ArrayLike, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return Tensor._from_op(
        np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),), "transpose"
    )


def swapaxes(a: ArrayLike, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[ax1], axes[ax2] = axes[ax2], axes[ax1]
    return transpose(a, axes)


def _is_basic_index(idx) -> bool:
    items = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (int, slice, type(None), type(Ellipsis))) for i in items)


def getitem(a: ArrayLike, idx) -> Tensor:
    a = as_tensor(a)
    if isinstance(idx, Tensor):
        idx = idx.data.astype(np.intp)
    out = a.data[idx]
    shape = a.shape
    basic = _is_basic_index(idx)

    def backward(g):
        full = np.zeros(shape)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return Tensor._from_op(np.array(out, dtype=np.float64), (a,), backward, "getitem")


def concat(tensors: Iterable[ArrayLike], axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts:
        raise ShapeError("concat of an empty list")
    try:
        out = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"cannot concat shapes {[t.shape for t in ts]}") from exc
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._from_op(out, ts, backward, "concat")


def split(a: ArrayLike, sections: int, axis: int = 0) -> list:
    a = as_tensor(a)
    n = a.shape[axis]
    if n % sections:
        raise ShapeError(f"axis of length {n} does not split into {sections} equal parts")
    step = n // sections
    out = []
    for i in range(sections):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(i * step, (i + 1) * step)
        out.append(getitem(a, tuple(idx)))
    return out


def roll(a: ArrayLike, shift, axis) -> Tensor:
    a = as_tensor(a)
    if isinstance(shift, int):
        neg_shift = -shift
    else:
        neg_shift = tuple(-s for s in shift)
    return Tensor._from_op(
        np.roll(a.data, shift, axis), (a,), lambda g: (np.roll(g, neg_shift, axis),), "roll"
    )


def pad(a: ArrayLike, widths) -> Tensor:
    """Zero padding; ``widths`` as for :func:`numpy.pad`."""
    a = as_tensor(a)
    widths = tuple(tuple(w) for w in widths)
    crop = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return Tensor._from_op(np.pad(a.data, widths), (a,), lambda g: (g[crop],), "pad")


# ---------------------------------------------------------------------------
# fused primitives
# ---------------------------------------------------------------------------


def softmax(a: ArrayLike, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    x = a.data
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (a,), backward, "softmax")


def conv2d(x: ArrayLike, weight: ArrayLike, bias: Optional[ArrayLike] = None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation, ``x`` (B, C, H, W), ``weight`` (O, C, kh, kw), zero padding."""
    x, weight = as_tensor(x), as_tensor(weight)
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError("conv2d expects 4-D input and weight")
    B, C, H, W = x.shape
    O, Cw, kh, kw = weight.shape
    if C != Cw:
        raise ShapeError(f"conv2d channel mismatch: input {C}, weight {Cw}")
    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    Hp, Wp = xp.shape[2:]
    Ho = (Hp - kh) // stride + 1
    Wo = (Wp - kw) // stride + 1
    if Ho <= 0 or Wo <= 0:
        raise ShapeError(f"conv2d kernel {kh}x{kw} larger than padded input {Hp}x{Wp}")
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride][:, :, :Ho, :Wo]  # B, C, Ho, Wo, kh, kw
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * Ho * Wo, C * kh * kw)
    wmat = weight.data.reshape(O, -1)
    out = (cols @ wmat.T).reshape(B, Ho, Wo, O)
    parents = (x, weight)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data
        parents = parents + (bias,)
    out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, O)
        gx = gw = gb = None
        if weight.requires_grad:
            gw = (gm.T @ cols).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = gm.sum(axis=0)
        if x.requires_grad:
            gcols = (gm @ wmat).reshape(B, Ho, Wo, C, kh, kw)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + stride * Ho : stride, j : j + stride * Wo : stride] += gcols[
                        :, :, :, :, i, j
                    ].transpose(0, 3, 1, 2)
            gx = gxp[:, :, padding : padding + H, padding : padding + W]
        grads = (gx, gw)
        return grads + (gb,) if bias is not None else grads

    return Tensor._from_op(out, parents, backward, "conv2d")
