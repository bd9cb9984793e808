"""Procedural shadow images with masks and shadow-free ground truth."""

from __future__ import annotations

import os
from typing import Dict

import numpy as np
from scipy.ndimage import uniform_filter

from .crops import window_fractions
from .io import quantize, save_image
from .manifest import DatasetManifest, ManifestEntry, write_manifest

DARKEN_LO, DARKEN_HI = 0.3, 0.6
MAX_TRIES = 200
# keeps rejection sampling of crops from ever exhausting its attempt budget in practice
MIN_WINDOW_FRACTION = 0.02


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6 - 15) + 10)


def value_noise(rng: np.random.Generator, size: int, cells: int) -> np.ndarray:
    """Smooth lattice noise in [-1, 1]: random values on a ``cells`` grid, quintic-faded bilinear blend."""
    lattice = rng.uniform(-1.0, 1.0, (cells + 1, cells + 1))
    pos = (np.arange(size) + 0.5) * cells / size
    i = np.minimum(pos.astype(int), cells - 1)
    f = _fade(pos - i)
    rows = lattice[i] * (1 - f)[:, None] + lattice[i + 1] * f[:, None]
    return rows[:, i] * (1 - f)[None, :] + rows[:, i + 1] * f[None, :]


def background(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / size
    base = rng.uniform(0.45, 0.8, 3)
    img = np.broadcast_to(base[:, None, None], (3, size, size)).copy()
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 2.5, 2) * rng.choice([-1, 1], 2)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.uniform(0.03, 0.08)
        tint = rng.uniform(0.5, 1.0, 3)
        img += amp * tint[:, None, None] * np.sin(2 * np.pi * (fx * xx + fy * yy) + phase)
    for cells, amp in ((4, 0.06), (8, 0.03)):
        tint = rng.uniform(0.6, 1.0, 3)
        img += amp * tint[:, None, None] * value_noise(rng, size, cells)
    return np.clip(img, 0.05, 1.0)


def _shape(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] + 0.5
    cy, cx = rng.uniform(0.2, 0.8, 2) * size
    dy, dx = yy - cy, xx - cx
    if rng.random() < 0.5:
        a, b = rng.uniform(0.28, 0.5, 2) * size
        th = rng.uniform(0, np.pi)
        u = dx * np.cos(th) + dy * np.sin(th)
        v = -dx * np.sin(th) + dy * np.cos(th)
        return (u / a) ** 2 + (v / b) ** 2 <= 1.0
    k = int(rng.integers(5, 9))
    angles = np.sort(rng.uniform(0, 2 * np.pi, k))
    radii = rng.uniform(0.3, 0.55, k) * size
    theta = np.mod(np.arctan2(dy, dx), 2 * np.pi)
    r = np.interp(theta, np.concatenate([angles - 2 * np.pi, angles, angles + 2 * np.pi]), np.tile(radii, 3))
    return np.hypot(dy, dx) <= r


def render_sample(rng: np.random.Generator, size: int, patch: int) -> Dict[str, np.ndarray]:
    """One synthetic image.

    Returns quantized ``gt``, ``shadow`` and binary ``mask`` plus the
    continuous ``field`` such that ``shadow == quantize(gt * field)``.
    """
    for _ in range(MAX_TRIES):
        gt = quantize(background(rng, size))
        soft = uniform_filter(_shape(rng, size).astype(np.float64), size=3, mode="nearest")
        mask = (soft >= 0.5).astype(np.float64)
        if min(window_fractions(mask, patch)) < MIN_WINDOW_FRACTION:
            continue
        factor = rng.uniform(DARKEN_LO, DARKEN_HI) + 0.03 * value_noise(rng, size, 4)
        factor = np.clip(factor, DARKEN_LO, DARKEN_HI)
        field = 1.0 - soft * (1.0 - factor)
        shadow = quantize(gt * field[None])
        inside = shadow[:, mask > 0].mean()
        outside = shadow[:, mask == 0].mean()
        if inside < outside:
            return {"gt": gt, "shadow": shadow, "mask": mask[None], "field": field[None]}
    raise RuntimeError("could not render a usable sample")


def synth_dataset(out_dir: str, count: int, size: int = 64, seed: int = 0, test_count=None, patch=None) -> DatasetManifest:
    """Write ``count`` image/mask/gt triples plus manifests and return the full manifest.

    ``manifest.txt`` lists every image; ``train.txt`` and ``test.txt`` split it,
    the last ``test_count`` images (default ``count // 10``) being held out.
    At least 2% of crop positions of size ``patch`` (default ``size // 2``) are valid
    shadow crops, and likewise for shadow-free crops.
    """
    if count <= 0 or size <= 0:
        raise ValueError("count and size must be positive")
    patch = size // 2 if patch is None else patch
    test_count = count // 10 if test_count is None else test_count
    if not 0 <= test_count <= count:
        raise ValueError(f"test_count must lie in [0, {count}]")
    for sub in ("images", "masks", "gt"):
        os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
    children = np.random.SeedSequence(seed).spawn(count)
    entries = []
    for i, child in enumerate(children):
        sample = render_sample(np.random.default_rng(child), size, patch)
        name = f"{i:04d}.png"
        img = os.path.join(out_dir, "images", name)
        msk = os.path.join(out_dir, "masks", name)
        save_image(img, sample["shadow"])
        save_image(msk, sample["mask"])
        save_image(os.path.join(out_dir, "gt", name), sample["gt"])
        entries.append(ManifestEntry(os.path.abspath(img), os.path.abspath(msk)))
    n_train = count - test_count
    write_manifest(os.path.join(out_dir, "train.txt"), DatasetManifest(entries[:n_train], "train", seed))
    write_manifest(os.path.join(out_dir, "test.txt"), DatasetManifest(entries[n_train:], "test", seed))
    full = DatasetManifest(entries, "train", seed)
    write_manifest(os.path.join(out_dir, "manifest.txt"), full)
    return full
