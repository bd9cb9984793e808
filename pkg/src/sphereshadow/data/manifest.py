"""Dataset manifests.

One record per line, tab separated, paths relative to the manifest's folder::

    images/0000.png<TAB>masks/0000.png[<TAB>infrared/0000.png]

Lines starting with ``#`` are comments; ``# split=<train|test> seed=<int>``
carries the metadata. A ground-truth image, when present, sits in a ``gt``
folder beside the image folder under the same file name.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .io import ImageLoadError, load_image, load_mask

SPLITS = ("train", "test")


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestEntry:
    image: str
    mask: str
    infrared: Optional[str] = None

    @property
    def gt(self) -> Optional[str]:
        folder = os.path.dirname(os.path.dirname(self.image))
        path = os.path.join(folder, "gt", os.path.basename(self.image))
        return path if os.path.isfile(path) else None


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry]
    split: str = "train"
    seed: Optional[int] = None
    path: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ManifestError(f"split must be one of {SPLITS}, got {self.split!r}")

    def __len__(self) -> int:
        return len(self.entries)

    def validate(self) -> None:
        """Every file exists and decodes, and mask dims match image dims."""
        for e in self.entries:
            img = load_image(e.image)
            load_mask(e.mask, img.shape)
            if e.infrared is not None:
                ir = load_image(e.infrared)
                if ir.shape[1:] != img.shape[1:]:
                    raise ImageLoadError(f"infrared {e.infrared} size differs from {e.image}")

    def load(self, index: int):
        """Return ``(image, mask, infrared_or_None, gt_or_None)`` arrays for one record."""
        e = self.entries[index]
        img = load_image(e.image)
        if img.shape[0] == 1:
            img = np.repeat(img, 3, axis=0)
        mask = load_mask(e.mask, img.shape)
        ir = None
        if e.infrared is not None:
            ir = load_image(e.infrared)
            if ir.shape[0] == 3:
                ir = ir.mean(axis=0, keepdims=True)
        gt = None
        if e.gt is not None:
            gt = load_image(e.gt)
        return img, mask, ir, gt


def read_manifest(path: str) -> DatasetManifest:
    if not os.path.isfile(path):
        raise ManifestError(f"manifest not found: {path}")
    root = os.path.dirname(os.path.abspath(path))
    entries = []
    split, seed = "train", None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    key, _, val = tok.partition("=")
                    if key == "split":
                        split = val
                    elif key == "seed" and val:
                        seed = int(val)
                continue
            cols = line.split("\t")
            if len(cols) not in (2, 3):
                raise ManifestError(f"{path}:{lineno}: expected 2 or 3 tab-separated columns")
            paths = [os.path.join(root, c) if c else None for c in cols]
            entries.append(ManifestEntry(paths[0], paths[1], paths[2] if len(paths) == 3 else None))
    return DatasetManifest(entries, split=split, seed=seed, path=path)


def write_manifest(path: str, manifest: DatasetManifest) -> None:
    root = os.path.dirname(os.path.abspath(path))
    lines = [f"# split={manifest.split} seed={'' if manifest.seed is None else manifest.seed}"]
    for e in manifest.entries:
        cols = [os.path.relpath(e.image, root), os.path.relpath(e.mask, root)]
        if e.infrared is not None:
            cols.append(os.path.relpath(e.infrared, root))
        lines.append("\t".join(cols))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    manifest.path = path
