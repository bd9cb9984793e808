"""Windowed multi-head self-attention block with optional cyclic shift.

Token maps are channels-last, ``(B, H, W, C)``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..autodiff import Tensor, ShapeError, as_tensor, gelu, matmul, reshape, roll, softmax, swapaxes, transpose
from .layers import LayerNorm, Linear, Module, param, trunc_normal

MASK_VALUE = -1e4


@lru_cache(maxsize=None)
def relative_position_index(window: int) -> np.ndarray:
    coords = np.stack(np.meshgrid(np.arange(window), np.arange(window), indexing="ij")).reshape(2, -1)
    rel = coords[:, :, None] - coords[:, None, :]
    rel = rel.transpose(1, 2, 0) + (window - 1)
    return rel[..., 0] * (2 * window - 1) + rel[..., 1]


@lru_cache(maxsize=None)
def shift_attention_mask(height: int, width: int, window: int, shift: int) -> np.ndarray:
    """Additive mask ``(num_windows, N, N)`` blocking attention across wrapped borders."""
    labels = np.zeros((height, width))
    cnt = 0
    spans = (slice(0, -window), slice(-window, -shift), slice(-shift, None))
    for hs in spans:
        for ws in spans:
            labels[hs, ws] = cnt
            cnt += 1
    win = window_partition_np(labels[None, :, :, None], window)[..., 0]
    diff = win[:, None, :] - win[:, :, None]
    return np.where(diff != 0, MASK_VALUE, 0.0)


def window_partition_np(x: np.ndarray, window: int) -> np.ndarray:
    B, H, W, C = x.shape
    x = x.reshape(B, H // window, window, W // window, window, C)
    return x.transpose(0, 1, 3, 2, 4, 5).reshape(-1, window * window, C)


def window_partition(x: Tensor, window: int) -> Tensor:
    B, H, W, C = x.shape
    x = reshape(x, (B, H // window, window, W // window, window, C))
    x = transpose(x, (0, 1, 3, 2, 4, 5))
    return reshape(x, (B * (H // window) * (W // window), window * window, C))


def window_reverse(windows: Tensor, window: int, B: int, H: int, W: int) -> Tensor:
    C = windows.shape[-1]
    x = reshape(windows, (B, H // window, W // window, window, window, C))
    x = transpose(x, (0, 1, 3, 2, 4, 5))
    return reshape(x, (B, H, W, C))


class WindowAttention(Module):
    def __init__(self, dim: int, num_heads: int, window: int, rng: np.random.Generator):
        if dim % num_heads:
            raise ValueError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.dim = dim
        self.num_heads = num_heads
        self.window = window
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = Linear(dim, 3 * dim, rng, std=0.02)
        self.rel_bias = param(trunc_normal(rng, ((2 * window - 1) ** 2, num_heads), 0.02))
        self.proj = Linear(dim, dim, rng, std=0.02)

    def __call__(self, windows: Tensor, mask=None, return_attention: bool = False):
        BW, N, C = windows.shape
        h = self.num_heads
        qkv = reshape(self.qkv(windows), (BW, N, 3, h, C // h))
        qkv = transpose(qkv, (2, 0, 3, 1, 4))
        q, k, v = qkv[0], qkv[1], qkv[2]
        attn = matmul(q * self.scale, swapaxes(k, -1, -2))
        bias = self.rel_bias[relative_position_index(self.window).reshape(-1)]
        attn = attn + transpose(reshape(bias, (N, N, h)), (2, 0, 1))
        if mask is not None:
            nw = mask.shape[0]
            attn = reshape(attn, (BW // nw, nw, h, N, N)) + mask[None, :, None]
            attn = reshape(attn, (BW, h, N, N))
        attn = softmax(attn, axis=-1)
        out = transpose(matmul(attn, v), (0, 2, 1, 3))
        out = self.proj(reshape(out, (BW, N, C)))
        return (out, attn) if return_attention else out


class SwinBlock(Module):
    """LN, (shifted) window attention, residual, LN, GELU MLP, residual."""

    def __init__(self, dim: int, num_heads: int, window: int, shift: bool, rng: np.random.Generator, mlp_ratio: int = 4):
        self.dim = dim
        self.window = window
        self.shift = window // 2 if shift else 0
        self.norm1 = LayerNorm(dim)
        self.attn = WindowAttention(dim, num_heads, window, rng)
        self.norm2 = LayerNorm(dim)
        self.fc1 = Linear(dim, mlp_ratio * dim, rng, std=0.02)
        self.fc2 = Linear(mlp_ratio * dim, dim, rng, std=0.02)

    def __call__(self, x, shift: bool | None = None, return_attention: bool = False):
        x = as_tensor(x)
        B, H, W, C = x.shape
        w = self.window
        s = self.shift if shift is None else (w // 2 if shift else 0)
        if C != self.dim:
            raise ShapeError(f"block expects {self.dim} channels, got {C}")
        if H % w or W % w:
            raise ShapeError(f"token grid {H}x{W} not divisible by window {w}")
        h = self.norm1(x)
        mask = None
        if s:
            h = roll(h, (-s, -s), (1, 2))
            mask = shift_attention_mask(H, W, w, s)
        res = self.attn(window_partition(h, w), mask, return_attention)
        attn = None
        if return_attention:
            res, attn = res
        h = window_reverse(res, w, B, H, W)
        if s:
            h = roll(h, (s, s), (1, 2))
        x = x + h
        x = x + self.fc2(gelu(self.fc1(self.norm2(x))))
        return (x, attn) if return_attention else x


def swin_block(x, block: SwinBlock, shift: bool | None = None) -> Tensor:
    """Functional form; ``shift`` overrides the block's own setting."""
    return block(x, shift=shift)
