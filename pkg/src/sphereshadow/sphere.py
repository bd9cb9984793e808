"""Exponential/logarithmic maps at the north pole of a radius-r hypersphere.

Points live on the last axis: a tensor of shape ``(..., n)`` holds points of
the sphere ``{X in R^n : |X| = r}`` and the matching tangent vectors at the
pole ``N = (0, ..., 0, r)`` are stored by their first ``n - 1`` components
only (the last ambient coordinate of a pole tangent vector is always 0).

All maps are built from :mod:`sphereshadow.autodiff` ops, so they are
differentiable end to end. Near the pole the ratio ``a / sin a`` is replaced
by its Taylor expansion, which keeps values and gradients finite at ``a = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .autodiff import (
    DomainError,
    Tensor,
    arccos,
    as_tensor,
    clamp,
    concat,
    cos,
    matmul,
    reduce_sum,
    sin,
    sqrt,
    transpose,
    where,
)

PROJECTION_MODES = ("normalize", "reject")
ON_SPHERE_TOL = 1e-9


class SingularityError(DomainError):
    """The log map is undefined at (or too close to) the antipode of the pole."""


class OffSphereError(ValueError):
    """A point is not on the sphere and the config forbids projecting it."""


class DegenerateInputError(ValueError):
    """A zero vector cannot be projected onto the sphere."""


@dataclass(frozen=True)
class SphericalConfig:
    radius: float = 1.0
    pole_tol: float = 1e-6
    projection: str = "normalize"
    dim: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not self.pole_tol >= 0:
            raise ValueError(f"pole_tol must be non-negative, got {self.pole_tol}")
        if self.projection not in PROJECTION_MODES:
            raise ValueError(f"projection must be one of {PROJECTION_MODES}")
        if self.dim is not None and self.dim < 2:
            raise ValueError("ambient dimension must be at least 2")

    def check(self) -> None:
        """Strict validation used before training: pole_tol must lie in (0, 1e-3]."""
        if not 0.0 < self.pole_tol <= 1e-3:
            raise ValueError(f"pole_tol must lie in (0, 1e-3], got {self.pole_tol}")

    def north_pole(self, n: int) -> np.ndarray:
        pole = np.zeros(n)
        pole[-1] = self.radius
        return pole


def _check_dim(x: Tensor, cfg: SphericalConfig) -> int:
    n = x.shape[-1]
    if cfg.dim is not None and n != cfg.dim:
        raise ValueError(f"expected ambient dimension {cfg.dim}, got {n}")
    if n < 2:
        raise ValueError("ambient dimension must be at least 2")
    return n


def to_sphere(x, cfg: SphericalConfig) -> Tensor:
    """Put ``x`` on the sphere: rescale to norm r, or verify it already is."""
    x = as_tensor(x)
    _check_dim(x, cfg)
    norms = np.sqrt((x.data * x.data).sum(axis=-1, keepdims=True))
    r = cfg.radius
    if cfg.projection == "reject":
        if np.any(np.abs(norms - r) > ON_SPHERE_TOL * r):
            raise OffSphereError(f"point(s) off the sphere of radius {r}")
        return x
    if np.any(norms == 0.0):
        raise DegenerateInputError("zero vector cannot be projected onto the sphere")
    return x * (r / sqrt(reduce_sum(x * x, axis=-1, keepdims=True)))


def embed_tangent(m) -> Tensor:
    """Ambient form ``(m, 0)`` of a tangent vector at the pole."""
    m = as_tensor(m)
    return concat([m, Tensor(np.zeros(m.shape[:-1] + (1,)))], axis=-1)


def log_map(x, cfg: SphericalConfig, branch: str = "auto") -> Tensor:
    """Tangent components at the pole of the geodesic ending at ``x``.

    Returns a tensor of shape ``(..., n - 1)`` whose norm equals the geodesic
    distance from the pole. ``branch`` forces the series or closed-form factor
    and exists for consistency checks.
    """
    x = to_sphere(x, cfg)
    n = x.shape[-1]
    r = cfg.radius
    eps = cfg.pole_tol
    c = clamp(x[..., n - 1 : n] / r, -1.0, 1.0)
    if np.any(c.data <= -math.cos(eps)):
        raise SingularityError("log map undefined within pole_tol of the antipode")

    small = _pick_branch(c.data > math.cos(eps), branch)
    c_safe = where(small, 0.0, c)
    alpha = arccos(c_safe)
    direct = alpha / sin(alpha)
    series = 1.0 + (1.0 - c) / 3.0  # alpha^2 ~ 2 (1 - c)
    factor = where(small, series, direct)
    return factor * x[..., : n - 1]


def exp_map(m, cfg: SphericalConfig, branch: str = "auto") -> Tensor:
    """Sphere point reached from the pole along tangent components ``m``."""
    m = as_tensor(m)
    r = cfg.radius
    eps = cfg.pole_tol
    sq = reduce_sum(m * m, axis=-1, keepdims=True)
    small = _pick_branch(sq.data < (eps * r) ** 2, branch)

    beta = sqrt(where(small, 1.0, sq)) / r
    sinc_direct = sin(beta) / beta
    cos_direct = cos(beta)

    b2 = sq / (r * r)
    sinc_series = 1.0 - b2 / 6.0 + b2 * b2 / 120.0
    cos_series = 1.0 - b2 / 2.0 + b2 * b2 / 24.0

    sinc = where(small, sinc_series, sinc_direct)
    cosb = where(small, cos_series, cos_direct)
    return concat([m * sinc, cosb * r], axis=-1)


def _pick_branch(small: np.ndarray, branch: str) -> np.ndarray:
    if branch == "auto":
        return small
    if branch == "series":
        return np.ones_like(small, dtype=bool)
    if branch == "direct":
        return np.zeros_like(small, dtype=bool)
    raise ValueError(f"unknown branch {branch!r}")


def tangent_linear(m, weight, bias) -> Tensor:
    """Affine map between pole tangent spaces: ``W m + b`` on the last axis."""
    m, weight, bias = as_tensor(m), as_tensor(weight), as_tensor(bias)
    if weight.ndim != 2 or bias.shape != (weight.shape[0],):
        raise ValueError(f"bad transform shapes W{weight.shape}, b{bias.shape}")
    if m.shape[-1] != weight.shape[1]:
        raise ValueError(f"tangent vector has {m.shape[-1]} components, W expects {weight.shape[1]}")
    return matmul(m, transpose(weight)) + bias


def spherical_transform(features, weight, bias, cfg: SphericalConfig, axis: int = 0) -> Tensor:
    """Project onto the sphere, log map, tangent affine map, exp map.

    ``axis`` is the channel axis of ``features``; every channel vector (one per
    position) is treated as an independent point. The output has
    ``weight.shape[0] + 1`` channels on that axis.
    """
    features = as_tensor(features)
    nd = features.ndim
    axis = axis % nd
    perm = [i for i in range(nd) if i != axis] + [axis]
    x = transpose(features, perm) if axis != nd - 1 else features
    y = exp_map(tangent_linear(log_map(x, cfg), weight, bias), cfg)
    if axis == nd - 1:
        return y
    return transpose(y, list(np.argsort(perm)))


def geodesic_distance(x, y, cfg: SphericalConfig) -> Tensor:
    """Great-circle distance ``r * arccos(<x, y> / r^2)``, in [0, pi r]."""
    x = to_sphere(x, cfg)
    y = to_sphere(y, cfg)
    r = cfg.radius
    cosang = clamp(reduce_sum(x * y, axis=-1) / (r * r), -1.0, 1.0)
    return arccos(cosang) * r
