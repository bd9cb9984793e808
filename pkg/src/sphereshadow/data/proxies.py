"""Stand-ins for the two generative stages: visible-to-infrared and shadow rendering."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from ..autodiff import Tensor, as_tensor, sigmoid
from ..model.layers import Module, param

LUMA = np.array([0.299, 0.587, 0.114])
IR_GAMMA = 0.6
GAMMA_LO, GAMMA_HI = 0.1, 0.9
PENUMBRA_WIDTH = 4


def _blur_kernel(size: int = 5, sigma: float = 1.0) -> np.ndarray:
    x = np.arange(size) - size // 2
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def luminance(img: np.ndarray) -> np.ndarray:
    """``(..., 3, H, W)`` RGB to ``(..., 1, H, W)`` luma; single-channel input passes through."""
    img = np.asarray(img, dtype=np.float64)
    if img.shape[-3] == 1:
        return img
    return np.einsum("c,...chw->...hw", LUMA, img)[..., None, :, :]


def pseudo_infrared(visible: np.ndarray) -> np.ndarray:
    """Luma, 5x5 Gaussian blur (sigma 1, reflected borders), gamma 0.6, clamp to [0, 1]."""
    y = luminance(visible)
    k = _blur_kernel()
    y = correlate1d(y, k, axis=-1, mode="reflect")
    y = correlate1d(y, k, axis=-2, mode="reflect")
    return np.clip(np.power(np.clip(y, 0.0, None), IR_GAMMA), 0.0, 1.0)


def penumbra_ramp(size: int, width: int = PENUMBRA_WIDTH) -> np.ndarray:
    """Shadow strength over a square patch: 0 on the border, rising linearly to 1 ``width`` pixels in."""
    idx = np.arange(size)
    edge = np.minimum(idx, size - 1 - idx)
    dist = np.minimum(edge[:, None], edge[None, :])
    return np.clip(dist / float(width), 0.0, 1.0)


def darkening_factors(raw) -> Tensor:
    """Map unconstrained parameters into (0.1, 0.9)."""
    return GAMMA_LO + (GAMMA_HI - GAMMA_LO) * sigmoid(raw)


def pseudo_shadow(patch, raw_gamma) -> Tensor:
    """Darken a ``(3, P, P)`` (or batched) patch by per-channel factors with a soft border.

    ``out = patch * (1 - ramp * (1 - gamma))`` where ``ramp`` is
    :func:`penumbra_ramp`; differentiable in ``raw_gamma``.
    """
    patch = as_tensor(patch)
    P = patch.shape[-1]
    if patch.shape[-2] != P:
        raise ValueError(f"patch must be square, got {patch.shape}")
    gamma = darkening_factors(raw_gamma)
    C = gamma.shape[0]
    ramp = Tensor(penumbra_ramp(P))
    shade = 1.0 - ramp * (1.0 - gamma.reshape(C, 1, 1))
    return patch * shade


class ShadowGenerator(Module):
    """Three trainable darkening factors, initialised at the middle of their range."""

    def __init__(self, channels: int = 3):
        self.raw_gamma = param(np.zeros(channels))

    @property
    def gamma(self) -> np.ndarray:
        return darkening_factors(self.raw_gamma.detach()).data

    def __call__(self, patch) -> Tensor:
        return pseudo_shadow(patch, self.raw_gamma)
