"""Dual-channel spherical training targets and class-balancing weight maps."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .volcore import PointSet, ValidationError, Volume3D, as_array

DEFAULT_RADIUS = 4.0


@dataclass(frozen=True)
class TargetConfig:
    radius_voxels: float = DEFAULT_RADIUS

    def __post_init__(self):
        if not self.radius_voxels >= 1:
            raise ValidationError(f"radius_voxels must be >= 1, got {self.radius_voxels}")


def render_spheres(points: PointSet, shape: Sequence[int], radius: float) -> np.ndarray:
    """Binary uint8 mask: voxel v is set iff ``|v - c| <= radius`` for some point c."""
    shape = tuple(int(s) for s in shape)
    out = np.zeros(shape, dtype=np.uint8)
    r2 = float(radius) ** 2
    reach = int(math.floor(radius)) + 1
    for c in points.coords:
        lo = [max(int(math.floor(ci)) - reach, 0) for ci in c]
        hi = [min(int(math.ceil(ci)) + reach + 1, n) for ci, n in zip(c, shape)]
        if any(h <= l for l, h in zip(lo, hi)):
            continue
        zz, yy, xx = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        d2 = (zz - c[0]) ** 2 + (yy - c[1]) ** 2 + (xx - c[2]) ** 2
        out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= (d2 <= r2).astype(np.uint8)
    return out


def render_targets(pre: PointSet, post: PointSet, shape: Sequence[int],
                   cfg: TargetConfig = TargetConfig(),
                   voxel_size_nm=(8.0, 8.0, 8.0)) -> Tuple[Volume3D, Volume3D]:
    """Render one binary sphere mask per channel.

    Spheres at the volume edge are clipped and overlapping spheres union.
    Raises ValidationError listing the ids of points outside ``shape``.
    """
    pre.check_inside(shape)
    post.check_inside(shape)
    return tuple(
        Volume3D(render_spheres(pts, shape, cfg.radius_voxels), voxel_size_nm, "label")
        for pts in (pre, post))


@dataclass
class WeightMap:
    weights: np.ndarray
    w_fg: float
    w_bg: float


def compute_weight_map(target) -> WeightMap:
    """Inverse-frequency re-weighting from foreground/background voxel counts.

    ``w_fg = N / (2 N_fg)`` and ``w_bg = N / (2 N_bg)``, so both classes
    contribute equal total weight. If one class is empty its weight is 0 and
    the other class gets weight 1.
    """
    mask = as_array(target) != 0
    n = mask.size
    n_fg = int(np.count_nonzero(mask))
    n_bg = n - n_fg
    if n_fg == 0:
        w_fg, w_bg = 0.0, 1.0
    elif n_bg == 0:
        w_fg, w_bg = 1.0, 0.0
    else:
        w_fg, w_bg = n / (2.0 * n_fg), n / (2.0 * n_bg)
    weights = np.where(mask, w_fg, w_bg)
    return WeightMap(weights, w_fg, w_bg)
