"""Weak supervision from a single image: a shadowed crop and a lit crop picked via the mask."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .proxies import pseudo_infrared

COVERAGE_HI = 0.7
COVERAGE_LO = 0.02
MAX_ATTEMPTS = 1000

Coords = Tuple[int, int]


class NoValidWindowError(RuntimeError):
    """No window meeting the coverage bound was found within the attempt budget."""


def _mask2d(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    return mask[0] if mask.ndim == 3 else mask


def coverage(mask: np.ndarray, top: int, left: int, size: int) -> float:
    m = _mask2d(mask)
    return float(m[top : top + size, left : left + size].mean())


def _search(mask2d, size, rng, accept, what) -> Coords:
    H, W = mask2d.shape
    for _ in range(MAX_ATTEMPTS):
        top = int(rng.integers(0, H - size + 1))
        left = int(rng.integers(0, W - size + 1))
        if accept(mask2d[top : top + size, left : left + size].mean()):
            return top, left
    raise NoValidWindowError(f"no {what} window of size {size} after {MAX_ATTEMPTS} attempts")


def crop_pair(
    image: np.ndarray,
    mask: np.ndarray,
    size: int,
    rng: np.random.Generator,
    coverage_hi: float = COVERAGE_HI,
    coverage_lo: float = COVERAGE_LO,
):
    """Rejection-sample a mostly-shadowed and a nearly-lit ``size`` x ``size`` crop.

    Returns ``(shadow_patch, shadowfree_patch, (shadow_coords, free_coords))``
    with coords as (row, col) of the top-left corner.
    """
    m = _mask2d(mask)
    H, W = m.shape
    if size > H or size > W:
        raise NoValidWindowError(f"patch size {size} exceeds image {H}x{W}")
    s = _search(m, size, rng, lambda c: c >= coverage_hi, "shadow")
    f = _search(m, size, rng, lambda c: c <= coverage_lo, "shadow-free")
    shadow = image[:, s[0] : s[0] + size, s[1] : s[1] + size].copy()
    free = image[:, f[0] : f[0] + size, f[1] : f[1] + size].copy()
    return shadow, free, (s, f)


def window_fractions(mask: np.ndarray, size: int, coverage_hi=COVERAGE_HI, coverage_lo=COVERAGE_LO):
    """Fractions of all ``size`` x ``size`` window positions that pass each coverage bound.

    Computed exhaustively with an integral image; ``(0, 0)`` when the window does not fit.
    """
    m = _mask2d(mask)
    H, W = m.shape
    if size > H or size > W:
        return 0.0, 0.0
    ii = np.pad(m.cumsum(0).cumsum(1), ((1, 0), (1, 0)))
    sums = ii[size:, size:] - ii[:-size, size:] - ii[size:, :-size] + ii[:-size, :-size]
    cov = sums / (size * size)
    return float((cov >= coverage_hi).mean()), float((cov <= coverage_lo).mean())


def has_valid_windows(mask: np.ndarray, size: int, coverage_hi=COVERAGE_HI, coverage_lo=COVERAGE_LO) -> bool:
    """Whether both a shadow window and a shadow-free window exist."""
    hi, lo = window_fractions(mask, size, coverage_hi, coverage_lo)
    return hi > 0 and lo > 0


@dataclass
class ShadowSample:
    visible: np.ndarray
    mask: np.ndarray
    infrared: np.ndarray
    shadow_patch: np.ndarray
    shadowfree_patch: np.ndarray
    patch_coords: Tuple[Coords, Coords]
    coverage_hi: float = COVERAGE_HI
    coverage_lo: float = COVERAGE_LO

    def __post_init__(self):
        H, W = self.visible.shape[1:]
        P = self.shadow_patch.shape[-1]
        for top, left in self.patch_coords:
            if not (0 <= top <= H - P and 0 <= left <= W - P):
                raise ValueError(f"patch at {(top, left)} leaves the {H}x{W} image")
        (st, sl), (ft, fl) = self.patch_coords
        if coverage(self.mask, st, sl, P) < self.coverage_hi:
            raise ValueError("shadow patch below the coverage bound")
        if coverage(self.mask, ft, fl, P) > self.coverage_lo:
            raise ValueError("shadow-free patch above the coverage bound")

    def infrared_patch(self, which: int = 1) -> np.ndarray:
        top, left = self.patch_coords[which]
        P = self.shadow_patch.shape[-1]
        return self.infrared[:, top : top + P, left : left + P]


def make_sample(
    visible: np.ndarray,
    mask: np.ndarray,
    size: int,
    rng: np.random.Generator,
    infrared: Optional[np.ndarray] = None,
    coverage_hi: float = COVERAGE_HI,
    coverage_lo: float = COVERAGE_LO,
) -> ShadowSample:
    shadow, free, coords = crop_pair(visible, mask, size, rng, coverage_hi, coverage_lo)
    if infrared is None:
        infrared = pseudo_infrared(visible)
    mask = np.asarray(mask, dtype=np.float64).reshape((1,) + visible.shape[1:])
    return ShadowSample(visible, mask, infrared, shadow, free, coords, coverage_hi, coverage_lo)
