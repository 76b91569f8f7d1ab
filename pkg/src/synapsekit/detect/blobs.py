"""Scale-normalised Laplacian-of-Gaussian blob detection in 3D."""

from __future__ import annotations

import math

import numpy as np
from scipy import ndimage

from ..volcore import PointSet, as_array

SQRT3 = math.sqrt(3.0)


def log_stack(prob, sigmas) -> np.ndarray:
    """Stack of ``-sigma^2 * LoG(prob)`` responses, shape ``(len(sigmas), z, y, x)``.

    Bright blobs give positive responses.
    """
    arr = np.asarray(as_array(prob), dtype=np.float64)
    return np.stack([-(s ** 2) * ndimage.gaussian_laplace(arr, s, mode="nearest")
                     for s in sigmas])


def blob_log(prob, sigma_min: float = 1.0, sigma_max: float = 5.0, num_sigma: int = 9,
             blob_threshold: float = 0.05, channel: str = "pre", mask=None,
             return_sigmas: bool = False):
    """Detect blobs as local maxima of the LoG stack in space x scale.

    Scales are ``linspace(sigma_min, sigma_max, num_sigma)``. A maximum must
    dominate its 3x3x3x3 (space x scale) neighbourhood and exceed
    ``blob_threshold``. Blobs have radius ``sigma * sqrt(3)``; two blobs
    overlap when their centre distance is below the sum of their radii, and
    the weaker response of an overlapping pair is dropped (strongest first,
    ties by linear index).

    Returns blob centres with the LoG response as score, plus the selected
    sigma per blob when ``return_sigmas`` is set.
    """
    arr = as_array(prob)
    sigmas = np.linspace(sigma_min, sigma_max, int(num_sigma))
    if not np.any(arr):
        pts = PointSet.from_coords(channel, np.zeros((0, 3)), np.zeros(0))
        return (pts, np.zeros(0)) if return_sigmas else pts
    stack = log_stack(arr, sigmas)
    local = ndimage.maximum_filter(stack, size=3, mode="nearest")
    peaks = (stack == local) & (stack > blob_threshold)
    if mask is not None:
        peaks &= (as_array(mask) != 0)[None]
    s_idx, z, y, x = np.nonzero(peaks)
    response = stack[s_idx, z, y, x]
    coords = np.stack([z, y, x], axis=1).astype(np.float64)
    radii = sigmas[s_idx] * SQRT3
    linear = np.ravel_multi_index((s_idx, z, y, x), stack.shape)
    order = np.lexsort((linear, -response))
    kept = []
    for i in order:
        if kept:
            k = np.asarray(kept)
            d = np.sqrt(np.sum((coords[k] - coords[i]) ** 2, axis=1))
            if np.any(d < radii[k] + radii[i]):
                continue
        kept.append(i)
    kept = np.asarray(kept, dtype=np.int64)
    pts = PointSet.from_coords(channel, coords[kept], response[kept])
    return (pts, sigmas[s_idx[kept]]) if return_sigmas else pts
