"""Checkpoint files: a plain-text header followed by raw little-endian float64.

Layout::

    SPHERESHADOW-CKPT 1
    <count>
    <name> <shape>          # one line per tensor, shape as 3x4x5, "-" for scalars
    ...
    END
    <payload>               # tensors concatenated in header order, C order, '<f8'

Names may not contain whitespace.
"""

from __future__ import annotations

import os
from typing import Dict, Mapping

import numpy as np

MAGIC = "SPHERESHADOW-CKPT 1"


class CheckpointError(ValueError):
    pass


def _fmt_shape(shape) -> str:
    return "x".join(str(int(d)) for d in shape) if shape else "-"


def _parse_shape(text: str):
    return () if text == "-" else tuple(int(d) for d in text.split("x"))


def save_checkpoint(path: str, tensors: Mapping[str, np.ndarray]) -> None:
    lines = [MAGIC, str(len(tensors))]
    for name, arr in tensors.items():
        if not name or any(c.isspace() for c in name):
            raise CheckpointError(f"invalid tensor name {name!r}")
        lines.append(f"{name} {_fmt_shape(np.shape(arr))}")
    lines.append("END")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("ascii"))
        for arr in tensors.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    pos = 0

    def readline() -> str:
        nonlocal pos
        end = blob.find(b"\n", pos)
        if end < 0:
            raise CheckpointError(f"{path}: truncated header")
        line = blob[pos:end].decode("ascii")
        pos = end + 1
        return line

    if readline() != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    count = int(readline())
    entries = []
    for _ in range(count):
        name, shape = readline().split()
        entries.append((name, _parse_shape(shape)))
    if readline() != "END":
        raise CheckpointError(f"{path}: malformed header")
    out = {}
    for name, shape in entries:
        n = int(np.prod(shape)) if shape else 1
        nbytes = 8 * n
        if pos + nbytes > len(blob):
            raise CheckpointError(f"{path}: payload truncated at {name}")
        out[name] = np.frombuffer(blob, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(shape)
        pos += nbytes
    if pos != len(blob):
        raise CheckpointError(f"{path}: trailing bytes after payload")
    return out
