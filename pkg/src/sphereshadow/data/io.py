from __future__ import annotations

import os

import numpy as np
from PIL import Image


class ImageLoadError(ValueError):
    pass


def load_image(path: str) -> np.ndarray:
    """Read an 8-bit PNG as a channels-first float array in [0, 1].

    Grayscale files give one channel, everything else is converted to RGB.
    """
    if not os.path.isfile(path):
        raise ImageLoadError(f"missing image file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "F"):
                raise ImageLoadError(f"{path}: only 8-bit images are supported (mode {im.mode})")
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float64)[None]
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64).transpose(2, 0, 1)
    except ImageLoadError:
        raise
    except Exception as exc:  # PIL raises a zoo of types
        raise ImageLoadError(f"cannot decode {path}: {exc}") from exc
    return arr / 255.0


def load_mask(path: str, shape=None) -> np.ndarray:
    """Binary ``(1, H, W)`` mask, 1 = shadow. Thresholded at 0.5 of full scale."""
    arr = load_image(path)
    if arr.shape[0] == 3:
        arr = arr.mean(axis=0, keepdims=True)
    mask = (arr >= 0.5).astype(np.float64)
    if shape is not None and mask.shape[1:] != tuple(shape[-2:]):
        raise ImageLoadError(f"mask {path} is {mask.shape[1:]}, image is {tuple(shape[-2:])}")
    return mask


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def quantize(img: np.ndarray) -> np.ndarray:
    """Round to the nearest 8-bit level, back in [0, 1]."""
    return to_uint8(img).astype(np.float64) / 255.0


def save_image(path: str, img: np.ndarray) -> None:
    """Write a ``(C, H, W)`` or ``(H, W)`` array in [0, 1] as an 8-bit PNG."""
    arr = to_uint8(img)
    if arr.ndim == 3:
        arr = arr[0] if arr.shape[0] == 1 else arr.transpose(1, 2, 0)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    Image.fromarray(arr).save(path, format="PNG")
