"""Training configuration as a flat ``key = value`` text file.

Blank lines and ``#`` comments are ignored. Unknown keys are errors, so a
typo never silently falls back to a default.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

from .losses import LossWeights
from .model.network import ModelDims
from .sphere import SphericalConfig


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    seed: int = 0
    image_size: int = 64
    patch_size: int = 32
    train_manifest: str = ""
    test_manifest: str = ""
    # model
    dim: int = 32
    num_heads: int = 4
    window_size: int = 8
    num_blocks: int = 4
    embed_patch: int = 4
    decoder_blocks: int = 2
    radius: float = 1.0
    pole_tol: float = 1e-6
    # optimisation
    lr: float = 1e-4
    batch_size: int = 2
    iterations: int = 2000
    pairs_per_image: int = 1
    coverage_hi: float = 0.7
    coverage_lo: float = 0.02
    # loss weights
    w_ort: float = 1.0
    w_sim: float = 1.0
    w_adv: float = 1.0
    w_ide: float = 1.0
    w_rec: float = 1.0
    ortho_normalized: bool = True
    loss_features: str = "pre"
    # output
    checkpoint_dir: str = "checkpoints"
    output_dir: str = "runs"
    log_interval: int = 1
    checkpoint_interval: int = 500

    def __post_init__(self):
        positive = ("image_size", "patch_size", "batch_size", "iterations", "log_interval",
                    "checkpoint_interval", "pairs_per_image")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.patch_size > self.image_size:
            raise ConfigError("patch_size exceeds image_size")
        if not 0 <= self.coverage_lo < self.coverage_hi <= 1:
            raise ConfigError("need 0 <= coverage_lo < coverage_hi <= 1")
        if self.loss_features not in ("pre", "transformed"):
            raise ConfigError("loss_features must be 'pre' or 'transformed'")
        for name in ("w_ort", "w_sim", "w_adv", "w_ide", "w_rec"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        try:
            self.model_dims()
            self.sphere_config().check()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def model_dims(self) -> ModelDims:
        return ModelDims(
            dim=self.dim,
            num_heads=self.num_heads,
            window_size=self.window_size,
            num_blocks=self.num_blocks,
            patch_size=self.embed_patch,
            decoder_blocks=self.decoder_blocks,
        )

    def sphere_config(self) -> SphericalConfig:
        return SphericalConfig(radius=self.radius, pole_tol=self.pole_tol)

    def loss_weights(self) -> LossWeights:
        return LossWeights(self.w_ort, self.w_sim, self.w_adv, self.w_ide, self.w_rec)

    def resolve_paths(self, base: str) -> "TrainConfig":
        """Make relative paths relative to ``base`` (the config file's folder)."""
        for name in ("train_manifest", "test_manifest", "checkpoint_dir", "output_dir"):
            val = getattr(self, name)
            if val and not os.path.isabs(val):
                setattr(self, name, os.path.normpath(os.path.join(base, val)))
        return self

    def validate_paths(self) -> None:
        if not self.train_manifest:
            raise ConfigError("train_manifest is required")
        for name in ("train_manifest", "test_manifest"):
            path = getattr(self, name)
            if path and not os.path.isfile(path):
                raise ConfigError(f"{name} not found: {path}")

    def dumps(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in asdict(self).items())


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _parse_value(raw: str, kind, key: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


_TYPES = {"int": int, "float": float, "str": str, "bool": bool}


def parse_config(text: str, base: Optional[str] = None) -> TrainConfig:
    types = {f.name: _TYPES[f.type] for f in fields(TrainConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(val, types[key], key)
    cfg = TrainConfig(**values)
    if base is not None:
        cfg.resolve_paths(base)
    return cfg


def load_config(path: str) -> TrainConfig:
    if not os.path.isfile(path):
        raise ConfigError(f"config not found: {path}")
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), os.path.dirname(os.path.abspath(path)))
