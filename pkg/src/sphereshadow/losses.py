"""Training objectives: Gram orthogonality, feature SSIM, adversarial, identity.

Feature maps are channels-first, ``(C, H, W)`` or batched ``(B, C, H, W)``;
batched losses average over the batch.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional, Tuple

import numpy as np

from .autodiff import (
    ShapeError,
    Tensor,
    absolute,
    as_tensor,
    clamp,
    conv2d,
    leaky_relu,
    log,
    matmul,
    reduce_max,
    reduce_mean,
    reduce_min,
    reduce_sum,
    reshape,
    sigmoid,
    sqrt,
    swapaxes,
)
from .model.layers import Module, param

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
ORTHO_EPS = 1e-12
MINMAX_EPS = 1e-8
D_CLAMP = 1e-7


def _batched(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim == 3:
        return reshape(x, (1,) + x.shape)
    if x.ndim != 4:
        raise ShapeError(f"expected (C,H,W) or (B,C,H,W), got {x.shape}")
    return x


def gram(feat) -> Tensor:
    """Channel Gram matrix ``F F^T / (H W)``; batched input gives ``(B, C, C)``."""
    feat = as_tensor(feat)
    squeeze = feat.ndim == 3
    x = _batched(feat)
    B, C, H, W = x.shape
    f = reshape(x, (B, C, H * W))
    g = matmul(f, swapaxes(f, -1, -2)) / float(H * W)
    return reshape(g, (C, C)) if squeeze else g


def orthogonality_loss(align, separ, normalized: bool = True) -> Tensor:
    """Inner product of the flattened Gram matrices of two feature maps.

    With ``normalized`` (default) this is the absolute cosine between the two
    Gram vectors, in [0, 1]; otherwise the raw inner product.
    """
    a, s = _batched(align), _batched(separ)
    if a.shape != s.shape:
        raise ShapeError(f"align {a.shape} and separ {s.shape} differ")
    B = a.shape[0]
    ga = reshape(gram(a), (B, -1))
    gs = reshape(gram(s), (B, -1))
    inner = reduce_sum(ga * gs, axis=-1)
    if not normalized:
        return reduce_mean(inner)
    na = sqrt(reduce_sum(ga * ga, axis=-1))
    ns = sqrt(reduce_sum(gs * gs, axis=-1))
    return reduce_mean(absolute(inner) / (na * ns + ORTHO_EPS))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _valid_filter_matrix(n: int, g: np.ndarray) -> np.ndarray:
    k = len(g)
    mat = np.zeros((n - k + 1, n))
    for i in range(n - k + 1):
        mat[i, i : i + k] = g
    return mat


def _minmax(x: Tensor) -> Tensor:
    lo = reduce_min(x, axis=(2, 3), keepdims=True)
    hi = reduce_max(x, axis=(2, 3), keepdims=True)
    return (x - lo) / (hi - lo + MINMAX_EPS)


def ssim_map(a, b, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> Tensor:
    """Per-window SSIM of two ``(B, C, H, W)`` maps.

    Uses a separable Gaussian over every fully contained window, or global
    statistics (a single window) when the map is smaller than the window.
    """
    a, b = _batched(a), _batched(b)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    H, W = a.shape[2:]
    if H < window or W < window:

        def blur(x):
            return reduce_mean(x, axis=(2, 3), keepdims=True)

    else:
        g = gaussian_window(window, sigma)
        kh = Tensor(_valid_filter_matrix(H, g))
        kwt = Tensor(_valid_filter_matrix(W, g).T)

        def blur(x):
            return matmul(matmul(kh, x), kwt)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim_loss(a, b, normalize: bool = True) -> Tensor:
    """``1 - mean SSIM``; features are min-max scaled per channel first unless ``normalize`` is off."""
    a, b = _batched(a), _batched(b)
    if a.shape != b.shape:
        raise ShapeError(f"shapes differ: {a.shape} vs {b.shape}")
    if normalize:
        a, b = _minmax(a), _minmax(b)
    return 1.0 - reduce_mean(ssim_map(a, b))


def identity_loss(generated, target) -> Tensor:
    """Mean absolute difference."""
    generated, target = as_tensor(generated), as_tensor(target)
    if generated.shape != target.shape:
        raise ShapeError(f"shapes differ: {generated.shape} vs {target.shape}")
    return reduce_mean(absolute(generated - target))


class Discriminator(Module):
    """Strided conv patch classifier, 16-32-64-1 channels, LeakyReLU(0.2), sigmoid output."""

    def __init__(self, in_channels: int = 3, seed: int = 0, widths=(16, 32, 64)):
        rng = np.random.default_rng(seed)
        chans = (in_channels,) + tuple(widths)
        self.convs = []
        for cin, cout in zip(chans[:-1], chans[1:]):
            self.convs.append(_Conv(cin, cout, 4, 2, 1, rng))
        self.head = _Conv(chans[-1], 1, 3, 1, 1, rng)

    def __call__(self, x) -> Tensor:
        h = _batched(x)
        for conv in self.convs:
            h = leaky_relu(conv(h), 0.2)
        return sigmoid(self.head(h))


class _Conv(Module):
    def __init__(self, cin, cout, k, stride, padding, rng):
        self.weight = param(rng.normal(0.0, 0.02, size=(cout, cin, k, k)))
        self.bias = param(np.zeros(cout))
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, self.stride, self.padding)


def _clamped_log(p: Tensor) -> Tensor:
    return log(clamp(p, D_CLAMP, 1.0 - D_CLAMP))


def discriminator_loss(D: Discriminator, real, fake) -> Tensor:
    """``-E[log D(real)] - E[log(1 - D(fake))]``; pass ``fake`` detached."""
    d_real = D(real)
    d_fake = D(fake)
    return -reduce_mean(_clamped_log(d_real)) - reduce_mean(_clamped_log(1.0 - d_fake))


def generator_adversarial_loss(D: Discriminator, fake) -> Tensor:
    """Non-saturating generator objective ``-E[log D(fake)]``."""
    return -reduce_mean(_clamped_log(D(fake)))


def adversarial_losses(fake, real, D: Discriminator) -> Tuple[Tensor, Tensor]:
    """Return ``(generator_loss, discriminator_loss)``.

    The discriminator term sees ``fake`` detached, so backpropagating it never
    reaches the generator; the generator term is meant to be followed by a
    generator-only optimizer step.
    """
    fake = as_tensor(fake)
    gen = generator_adversarial_loss(D, fake)
    disc = discriminator_loss(D, as_tensor(real).detach(), fake.detach())
    return gen, disc


@dataclass
class LossWeights:
    ort: float = 1.0
    sim: float = 1.0
    adv: float = 1.0
    ide: float = 1.0
    rec: float = 1.0


@dataclass
class LossReport:
    ort_visible: float
    ort_infrared: float
    sim: float
    adv_generator: float
    adv_discriminator: float
    ide: float
    rec: float
    total: float

    @classmethod
    def header(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def values(self) -> Tuple[float, ...]:
        return tuple(asdict(self).values())

    def is_finite(self) -> Optional[str]:
        """Name of the first non-finite component, or None."""
        for name, val in asdict(self).items():
            if not math.isfinite(val):
                return name
        return None


@dataclass
class LossTerms:
    """Differentiable loss components of one generator step."""

    ort_visible: Tensor
    ort_infrared: Tensor
    sim: Tensor
    adv_generator: Tensor
    ide: Tensor
    rec: Tensor
    total: Tensor

    def report(self, adv_discriminator: float = float("nan")) -> LossReport:
        return LossReport(
            ort_visible=self.ort_visible.item(),
            ort_infrared=self.ort_infrared.item(),
            sim=self.sim.item(),
            adv_generator=self.adv_generator.item(),
            adv_discriminator=adv_discriminator,
            ide=self.ide.item(),
            rec=self.rec.item(),
            total=self.total.item(),
        )


def total_loss(
    visible,
    infrared,
    restored,
    target,
    pseudo_shadow,
    shadow_patch,
    D: Discriminator,
    weights: LossWeights = LossWeights(),
    use_transformed: bool = False,
    ortho_normalized: bool = True,
) -> LossTerms:
    """Weighted sum of every generator-side loss for one step.

    ``visible``/``infrared`` are :class:`FeatureBundle` objects; the Gram and
    SSIM terms use their pre-sphere halves unless ``use_transformed``.
    ``restored`` is the network output for the pseudo-shadowed input and
    ``target`` the shadow-free crop it was rendered from.
    """
    if use_transformed:
        va, vs, ia, is_ = visible.align, visible.separ, infrared.align, infrared.separ
    else:
        va, vs, ia, is_ = visible.align_pre, visible.separ_pre, infrared.align_pre, infrared.separ_pre
    ort_v = orthogonality_loss(va, vs, ortho_normalized)
    ort_i = orthogonality_loss(ia, is_, ortho_normalized)
    sim = ssim_loss(ia, va)
    adv = generator_adversarial_loss(D, pseudo_shadow)
    ide = identity_loss(pseudo_shadow, shadow_patch)
    rec = identity_loss(restored, target)
    total = (
        weights.ort * (ort_v + ort_i)
        + weights.sim * sim
        + weights.adv * adv
        + weights.ide * ide
        + weights.rec * rec
    )
    return LossTerms(ort_v, ort_i, sim, adv, ide, rec, total)
