"""Region-wise image quality metrics and the evaluation report.

Images are channels-first arrays in [0, 1]. Regions are given by a binary
mask (1 = shadow): ``"shadow"`` keeps mask pixels, ``"nonshadow"`` the rest
and ``"all"`` every pixel. SSIM restricted to a region averages the SSIM map
over pixels whose window centre lies in the region.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.ndimage import correlate1d

from .data.io import to_uint8
from .data.proxies import luminance
from .losses import SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW, gaussian_window

REGIONS = ("shadow", "nonshadow", "all")
METRICS = ("rmse", "psnr", "ssim")
PEAK = 255.0


class EmptyRegionError(ValueError):
    pass


def region_mask(mask: Optional[np.ndarray], region: str, shape) -> np.ndarray:
    """Boolean ``(H, W)`` selector for ``region``."""
    H, W = shape[-2:]
    if region == "all" or mask is None:
        if region != "all":
            raise ValueError(f"region {region!r} needs a mask")
        return np.ones((H, W), dtype=bool)
    m = np.asarray(mask)
    m = m.reshape(m.shape[-2:]) > 0.5
    if m.shape != (H, W):
        raise ValueError(f"mask is {m.shape}, image is {(H, W)}")
    if region == "shadow":
        return m
    if region == "nonshadow":
        return ~m
    raise ValueError(f"region must be one of {REGIONS}, got {region!r}")


def _prepare(pred, gt, mask, region):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shapes differ: {pred.shape} vs {gt.shape}")
    if pred.ndim == 2:
        pred, gt = pred[None], gt[None]
    sel = region_mask(mask, region, pred.shape)
    if not sel.any():
        raise EmptyRegionError(f"region {region!r} is empty")
    return pred, gt, sel


def rmse_region(pred, gt, mask=None, region: str = "all") -> float:
    """Root mean squared error over region pixels and channels, on the 0-255 scale."""
    pred, gt, sel = _prepare(pred, gt, mask, region)
    diff = (pred - gt)[:, sel]
    return float(np.sqrt(np.mean(diff * diff)) * PEAK)


def psnr_region(pred, gt, mask=None, region: str = "all") -> float:
    """``20 log10(255 / rmse)``; identical inputs give ``inf``."""
    err = rmse_region(pred, gt, mask, region)
    if err == 0.0:
        return math.inf
    return float(20.0 * np.log10(PEAK / err))


def ssim_full_map(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-pixel SSIM of ``(C, H, W)`` images with reflected borders."""
    g = gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def blur(x):
        return correlate1d(correlate1d(x, g, axis=-1, mode="reflect"), g, axis=-2, mode="reflect")

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    den = (mu_a**2 + mu_b**2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return num / den


def ssim_image(pred, gt, mask=None, region: str = "all") -> float:
    """Mean SSIM (per channel, then averaged) over window centres inside the region."""
    pred, gt, sel = _prepare(pred, gt, mask, region)
    smap = ssim_full_map(pred, gt)
    return float(np.mean(smap[:, sel].mean(axis=1)))


def entropy(image) -> float:
    """Shannon entropy in bits of the 8-bit luminance histogram."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[None]
    levels = to_uint8(luminance(img)).ravel()
    counts = np.bincount(levels, minlength=256)
    p = counts[counts > 0] / levels.size
    return float(max(0.0, -np.sum(p * np.log2(p))))


_FUNCS = {"rmse": rmse_region, "psnr": psnr_region, "ssim": ssim_image}


def image_metrics(pred, gt, mask) -> Dict[str, float]:
    """All nine full-reference numbers for one image; empty regions give ``nan``."""
    out = {}
    for metric, fn in _FUNCS.items():
        for region in REGIONS:
            try:
                out[f"{metric}_{region}"] = fn(pred, gt, mask, region)
            except EmptyRegionError:
                out[f"{metric}_{region}"] = math.nan
    return out


def _mean(values: Sequence[float]) -> float:
    # fsum is exactly rounded, so the average does not depend on image order
    vals = [v for v in values if not math.isnan(v)]
    if not vals:
        return math.nan
    if any(math.isinf(v) for v in vals):
        return math.inf
    return math.fsum(vals) / len(vals)


@dataclass
class EvalReport:
    """Averaged metrics for one method over a set of images."""

    name: str
    count: int
    entropy: float
    values: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_images(cls, name: str, preds, gts=None, masks=None) -> "EvalReport":
        preds = list(preds)
        ent = _mean([entropy(p) for p in preds])
        values: Dict[str, float] = {}
        if gts is not None:
            per_image = [image_metrics(p, g, m) for p, g, m in zip(preds, gts, masks)]
            for key in cls.keys():
                values[key] = _mean([row[key] for row in per_image])
        return cls(name, len(preds), ent, values)

    @staticmethod
    def keys() -> List[str]:
        return [f"{m}_{r}" for m in METRICS for r in REGIONS]

    @property
    def full_reference(self) -> bool:
        return bool(self.values)

    def columns(self) -> List[str]:
        cols = self.keys() if self.full_reference else []
        return ["method", "images"] + cols + ["entropy"]

    def row(self) -> List[str]:
        vals = [self.values[k] for k in self.keys()] if self.full_reference else []
        return [self.name, str(self.count)] + [_fmt(v) for v in vals] + [_fmt(self.entropy)]


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "identical"
    return repr(float(v))


def reports_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(reports[0].columns())
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def reports_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table; values rounded to 4 decimals for reading."""
    cols = reports[0].columns()
    rows = []
    for r in reports:
        cells = []
        for c in r.row():
            try:
                cells.append(f"{float(c):.4f}" if "." in c or "e" in c else c)
            except ValueError:
                cells.append(c)
        rows.append(cells)
    widths = [max(len(c), *(len(row[i]) for row in rows)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.rjust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    lines.append("ssim per region: mean over pixels whose 11x11 window centre lies in the region")
    return "\n".join(lines)
