"""Run a trained network over a manifest and score it against the untouched input."""

from __future__ import annotations

from typing import List

import numpy as np

from .data import DatasetManifest, pseudo_infrared
from .metrics import EvalReport
from .model import ShadowRemovalNet


def restore_image(net: ShadowRemovalNet, visible: np.ndarray, infrared=None) -> np.ndarray:
    """Shadow-free estimate of one ``(3, H, W)`` image, values in [0, 1]."""
    if infrared is None:
        infrared = pseudo_infrared(visible)
    return net.restore(visible, infrared)


def evaluate(net: ShadowRemovalNet, manifest: DatasetManifest) -> List[EvalReport]:
    """Reports for the model and for the identity baseline (input passed through).

    Full-reference metrics need a ground-truth image for every record;
    otherwise both reports carry entropy only.
    """
    inputs, preds, gts, masks = [], [], [], []
    for i in range(len(manifest)):
        img, mask, ir, gt = manifest.load(i)
        inputs.append(img)
        preds.append(restore_image(net, img, ir))
        gts.append(gt)
        masks.append(mask)
    if any(g is None for g in gts):
        gts = None
    return [
        EvalReport.from_images("model", preds, gts, masks),
        EvalReport.from_images("identity", inputs, gts, masks),
    ]
