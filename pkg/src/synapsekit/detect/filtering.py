"""Distance-based (and mask-constrained) pruning of detected sites."""

from __future__ import annotations

import numpy as np

from ..volcore import PointSet, ValidationError, as_array
from .config import FilterConfig
from .peaks import greedy_suppress


def filter_points(points: PointSet, cfg: FilterConfig, mask=None) -> PointSet:
    """Prune points that sit too close together.

    ``by_distance`` keeps points greedily by descending score (ties:
    ascending id) and drops anything within ``d_min`` of a kept point. If
    the set has no scores the priority is ascending id. ``by_distance_and_mask``
    additionally drops points whose nearest voxel is background in ``mask``.
    """
    if cfg.mode == "none":
        return points
    if cfg.mode not in ("by_distance", "by_distance_and_mask"):
        raise ValidationError(f"unknown filter mode {cfg.mode!r}")
    if cfg.mode == "by_distance_and_mask":
        if mask is None:
            raise ValidationError("by_distance_and_mask filtering needs a mask")
        m = as_array(mask)
        vox = np.clip(np.rint(points.coords).astype(np.int64), 0, np.array(m.shape) - 1)
        points = points.subset(m[tuple(vox.T)] != 0)
    if points.scores is None:
        order = np.argsort(points.ids, kind="stable")
    else:
        order = np.lexsort((points.ids, -points.scores))
    kept = greedy_suppress(points.coords, order, cfg.d_min)
    return points.subset(np.sort(kept))
