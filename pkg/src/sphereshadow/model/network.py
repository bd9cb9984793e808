"""Two-stream encoder, spherical shared/private decomposition and fusion decoder.

Images are channels-first ``(B, C, H, W)`` in [0, 1]. Encoder outputs and
feature bundles are channels-first too, ``(B, dim, H/p, W/p)``; the Swin
blocks run on a channels-last view internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..autodiff import ShapeError, Tensor, as_tensor, concat, no_grad, reshape, sigmoid, transpose
from ..sphere import SphericalConfig, spherical_transform
from .layers import LayerNorm, Linear, Module, param
from .swin import SwinBlock

VISIBLE = "visible"
INFRARED = "infrared"


@dataclass(frozen=True)
class ModelDims:
    dim: int = 32
    num_heads: int = 4
    window_size: int = 8
    num_blocks: int = 4
    patch_size: int = 4
    decoder_blocks: int = 2

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2:
            raise ValueError(f"dim must be a positive even integer, got {self.dim}")
        if self.num_heads <= 0 or self.dim % self.num_heads:
            raise ValueError(f"num_heads {self.num_heads} must divide dim {self.dim}")
        if (3 * self.dim // 2) % self.num_heads:
            raise ValueError(f"num_heads {self.num_heads} must divide fused width {3 * self.dim // 2}")
        for name in ("window_size", "num_blocks", "patch_size", "decoder_blocks"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def multiple(self) -> int:
        """Spatial size granularity the network needs (patch times window)."""
        return self.patch_size * self.window_size


@dataclass
class FeatureBundle:
    """Shared/private halves of one modality's features, before and after the sphere transform."""

    align: Tensor
    separ: Tensor
    align_pre: Tensor
    separ_pre: Tensor
    modality: str

    def __post_init__(self):
        if self.align.shape != self.separ.shape:
            raise ShapeError(f"align {self.align.shape} and separ {self.separ.shape} differ")

    @property
    def full(self) -> Tensor:
        return concat([self.align, self.separ], axis=1)


def _to_last(x: Tensor) -> Tensor:
    return transpose(x, (0, 2, 3, 1))


def _to_first(x: Tensor) -> Tensor:
    return transpose(x, (0, 3, 1, 2))


def _batched(x) -> Tuple[Tensor, bool]:
    x = as_tensor(x)
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape), True
    if x.ndim != 4:
        raise ShapeError(f"expected (C,H,W) or (B,C,H,W), got {x.shape}")
    return x, False


class Encoder(Module):
    """Patch embedding followed by Swin blocks with alternating shift."""

    def __init__(self, in_channels: int, dims: ModelDims, rng: np.random.Generator):
        self.in_channels = in_channels
        self.patch = dims.patch_size
        self.embed = Linear(in_channels * dims.patch_size**2, dims.dim, rng)
        self.blocks = [
            SwinBlock(dims.dim, dims.num_heads, dims.window_size, shift=bool(i % 2), rng=rng)
            for i in range(dims.num_blocks)
        ]

    def __call__(self, image) -> Tensor:
        x, squeezed = _batched(image)
        B, C, H, W = x.shape
        p = self.patch
        if C != self.in_channels:
            raise ShapeError(f"encoder expects {self.in_channels} channels, got {C}")
        if H % p or W % p:
            raise ShapeError(f"image {H}x{W} not divisible by patch size {p}")
        x = reshape(x, (B, C, H // p, p, W // p, p))
        x = transpose(x, (0, 2, 4, 1, 3, 5))
        x = self.embed(reshape(x, (B, H // p, W // p, C * p * p)))
        for blk in self.blocks:
            x = blk(x)
        x = _to_first(x)
        return reshape(x, x.shape[1:]) if squeezed else x


class SphereTransform(Module):
    """Trainable tangent-space affine map inside the sphere transform, identity at init."""

    def __init__(self, channels: int, cfg: SphericalConfig):
        self.cfg = cfg
        self.weight = param(np.eye(channels - 1))
        self.bias = param(np.zeros(channels - 1))

    def __call__(self, feat: Tensor) -> Tensor:
        # an all-zero channel vector has no direction; send it to the north pole
        dead = ~np.any(feat.data != 0.0, axis=1)
        if dead.any():
            offset = np.zeros(feat.shape)
            offset[:, -1] = dead
            feat = feat + offset
        return spherical_transform(feat, self.weight, self.bias, self.cfg, axis=1)


def decompose(feat, transform: SphereTransform, modality: str = VISIBLE) -> FeatureBundle:
    """Split channels at dim/2 into shared/private halves and map each through the sphere."""
    feat, _ = _batched(feat)
    dim = feat.shape[1]
    if dim % 2:
        raise ShapeError(f"channel count {dim} is odd")
    half = dim // 2
    align_pre = feat[:, :half]
    separ_pre = feat[:, half:]
    return FeatureBundle(
        align=transform(align_pre),
        separ=transform(separ_pre),
        align_pre=align_pre,
        separ_pre=separ_pre,
        modality=modality,
    )


class Decoder(Module):
    """Swin blocks over the fused channels, then linear patch expansion and a sigmoid."""

    def __init__(self, dims: ModelDims, out_channels: int, rng: np.random.Generator):
        width = 3 * dims.dim // 2
        self.patch = dims.patch_size
        self.out_channels = out_channels
        self.blocks = [
            SwinBlock(width, dims.num_heads, dims.window_size, shift=bool(i % 2), rng=rng)
            for i in range(dims.decoder_blocks)
        ]
        self.norm = LayerNorm(width)
        self.expand = Linear(width, out_channels * dims.patch_size**2, rng)

    def __call__(self, fused: Tensor) -> Tensor:
        x = _to_last(fused)
        for blk in self.blocks:
            x = blk(x)
        x = self.expand(self.norm(x))
        B, Hp, Wp, _ = x.shape
        p, c = self.patch, self.out_channels
        x = reshape(x, (B, Hp, Wp, c, p, p))
        x = transpose(x, (0, 3, 1, 4, 2, 5))
        return sigmoid(reshape(x, (B, c, Hp * p, Wp * p)))


def fuse(visible: FeatureBundle, infrared: FeatureBundle, decoder: Decoder) -> Tensor:
    """Decode the full visible feature together with the shared infrared half.

    The infrared private half never enters the computation.
    """
    if visible.modality != VISIBLE or infrared.modality != INFRARED:
        raise ValueError("fuse expects a visible bundle and an infrared bundle")
    if visible.align.shape[2:] != infrared.align.shape[2:] or visible.align.shape[0] != infrared.align.shape[0]:
        raise ShapeError(f"bundles misaligned: {visible.align.shape} vs {infrared.align.shape}")
    fused = concat([visible.align, visible.separ, infrared.align], axis=1)
    return decoder(fused)


@dataclass
class ForwardResult:
    output: Tensor
    visible: FeatureBundle
    infrared: FeatureBundle


class ShadowRemovalNet(Module):
    def __init__(self, dims: ModelDims = ModelDims(), cfg: SphericalConfig = SphericalConfig(), seed: int = 0):
        rng = np.random.default_rng(seed)
        self.dims = dims
        self.cfg = cfg
        self.visible_encoder = Encoder(3, dims, rng)
        self.infrared_encoder = Encoder(1, dims, rng)
        self.sphere = SphereTransform(dims.dim // 2, cfg)
        self.decoder = Decoder(dims, 3, rng)

    def forward(self, visible, infrared) -> ForwardResult:
        visible, _ = _batched(visible)
        infrared, _ = _batched(infrared)
        if visible.shape[2:] != infrared.shape[2:]:
            raise ShapeError(f"visible {visible.shape} and infrared {infrared.shape} differ spatially")
        vb = decompose(self.visible_encoder(visible), self.sphere, VISIBLE)
        ib = decompose(self.infrared_encoder(infrared), self.sphere, INFRARED)
        return ForwardResult(fuse(vb, ib, self.decoder), vb, ib)

    __call__ = forward

    def restore(self, visible: np.ndarray, infrared: np.ndarray) -> np.ndarray:
        """Inference on arbitrary-size arrays: reflection-pad to the grid, run, crop."""
        vis = np.asarray(visible, dtype=np.float64)
        ir = np.asarray(infrared, dtype=np.float64)
        squeeze = vis.ndim == 3
        if squeeze:
            vis, ir = vis[None], ir[None]
        H, W = vis.shape[2:]
        vis_p = pad_to_multiple(vis, self.dims.multiple)
        ir_p = pad_to_multiple(ir, self.dims.multiple)
        with no_grad():
            out = self.forward(Tensor(vis_p), Tensor(ir_p)).output.data[:, :, :H, :W]
        return out[0] if squeeze else out


def pad_to_multiple(images: np.ndarray, multiple: int) -> np.ndarray:
    """Reflection-pad the trailing two axes up to a multiple of ``multiple``."""
    H, W = images.shape[-2:]
    ph = (-H) % multiple
    pw = (-W) % multiple
    if not ph and not pw:
        return images
    if H < 2 or W < 2:
        raise ShapeError(f"image {H}x{W} too small to reflection-pad to a multiple of {multiple}")
    widths = [(0, 0)] * (images.ndim - 2) + [(0, ph), (0, pw)]
    return np.pad(images, widths, mode="reflect")
