"""Local-maximum peak detection with greedy distance suppression."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ..volcore import PointSet, as_array, halo_tiles
from .components import STRUCTURE_26

DEFAULT_TILE = (64, 64, 64)


def greedy_suppress(coords: np.ndarray, order: np.ndarray, radius: float) -> np.ndarray:
    """Greedy non-maximum suppression.

    Visits points in ``order`` and keeps a point unless it lies within
    ``radius`` (inclusive, Euclidean) of a point already kept. Returns the
    kept indices in visiting order; kept points are pairwise ``> radius``.
    """
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    n = len(coords)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    r2 = float(radius) ** 2
    tree = cKDTree(coords)
    # neighbour candidates from the tree, exact test on squared distance
    reach = float(radius) * (1 + 1e-9) + 1e-9
    suppressed = np.zeros(n, dtype=bool)
    kept = []
    for i in order:
        if suppressed[i]:
            continue
        kept.append(i)
        near = np.asarray(tree.query_ball_point(coords[i], reach), dtype=np.int64)
        if len(near):
            d2 = np.sum((coords[near] - coords[i]) ** 2, axis=1)
            suppressed[near[d2 <= r2]] = True
    return np.asarray(kept, dtype=np.int64)


def _candidates_tile(arr, size, core, window, inner, threshold_abs):
    sub = arr[window]
    local_max = ndimage.maximum_filter(sub, size=size, mode="nearest")[inner]
    values = sub[inner]
    return (values == local_max) & (values >= threshold_abs)


def local_maxima_mask(prob, min_distance: int, threshold_abs: float = 0.0,
                      threads: int = 1, tile=DEFAULT_TILE) -> np.ndarray:
    """Voxels >= every voxel in their (2*min_distance+1)^3 neighbourhood.

    The neighbourhood is clipped at the volume boundary. Tiles carry a halo
    of ``min_distance`` voxels, so the result does not depend on tiling or
    thread count.
    """
    arr = as_array(prob)
    size = 2 * int(min_distance) + 1
    out = np.zeros(arr.shape, dtype=bool)
    tiles = list(halo_tiles(arr.shape, tile, int(min_distance)))

    def run(t):
        core, window, inner = t
        return core, _candidates_tile(arr, size, core, window, inner, threshold_abs)

    if threads > 1 and len(tiles) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tiles))
    else:
        results = [run(t) for t in tiles]
    for core, block in results:
        out[core] = block
    return out


def _nearest_centroid(idx: np.ndarray, shape) -> int:
    """Voxel of ``idx`` nearest to their centroid (ties: smallest linear index)."""
    pos = np.array(np.unravel_index(idx, shape), dtype=np.float64).T
    d2 = np.sum((pos - pos.mean(axis=0)) ** 2, axis=1)
    return int(idx[np.lexsort((idx, d2))[0]])


def _plateau_representatives(group: np.ndarray) -> list:
    """Local coordinates of the innermost voxels of one plateau.

    The plateau's distance transform peaks once per convex lobe, so two
    touching blobs give two representatives. Each connected set of
    distance-transform maxima is reduced to its voxel nearest its centroid.
    """
    edt = ndimage.distance_transform_edt(group)
    edt[~group] = -1.0
    top = group & (edt == ndimage.maximum_filter(edt, size=3, mode="constant", cval=-1.0))
    labels, n = ndimage.label(top, structure=STRUCTURE_26)
    flat = labels.ravel()
    reps = []
    for k in range(1, n + 1):
        reps.append(_nearest_centroid(np.flatnonzero(flat == k), group.shape))
    return reps


def _collapse_plateaus(cand: np.ndarray) -> np.ndarray:
    """Linear indices of candidates with flat plateaus thinned out.

    Adjacent candidates must be equal-valued, so each 26-connected group of
    candidates is a plateau. A plateau is replaced by the innermost voxel of
    each of its lobes, so a single plateau blob decodes to its centre and two
    blobs that merely touch still decode to two points.
    """
    labels, n = ndimage.label(cand, structure=STRUCTURE_26)
    flat = labels.ravel()
    idx = np.flatnonzero(flat)
    if n == len(idx):
        return idx
    sizes = np.bincount(flat[idx], minlength=n + 1)
    keep = [idx[sizes[flat[idx]] == 1]]
    for k, box in enumerate(ndimage.find_objects(labels), start=1):
        if sizes[k] == 1:
            continue
        # one voxel of margin so the plateau rim sees background (except at the volume edge)
        box = tuple(slice(max(b.start - 1, 0), min(b.stop + 1, n_)) for b, n_ in zip(box, cand.shape))
        group = labels[box] == k
        origin = np.array([b.start for b in box])
        for r in _plateau_representatives(group):
            local = np.array(np.unravel_index(r, group.shape)) + origin
            keep.append([np.ravel_multi_index(tuple(local), cand.shape)])
    return np.sort(np.concatenate([np.asarray(k, dtype=np.int64) for k in keep]))


def peak_local_max(prob, min_distance: int = 5, threshold_abs: float = 0.0,
                   mask=None, channel: str = "pre", threads: int = 1,
                   tile=DEFAULT_TILE) -> PointSet:
    """Find local maxima of ``prob`` and suppress those closer than ``min_distance``.

    A voxel is a candidate when it is >= all voxels in its Chebyshev
    neighbourhood of radius ``min_distance``, its value is >=
    ``threshold_abs`` and it is inside ``mask`` (if given). Candidates are
    visited by descending value (ties: ascending linear index) and greedily
    suppressed so the survivors are pairwise more than ``min_distance``
    apart. Flat plateaus of equal maxima are thinned to the innermost voxel
    of each lobe.

    Returns a PointSet with ids 1..n in visiting order and the peak values as
    scores.
    """
    arr = as_array(prob)
    cand = local_maxima_mask(arr, min_distance, threshold_abs, threads=threads, tile=tile)
    if mask is not None:
        cand &= as_array(mask) != 0
    idx = _collapse_plateaus(cand)
    values = arr.ravel()[idx].astype(np.float64)
    order = np.lexsort((idx, -values))
    coords = np.array(np.unravel_index(idx, arr.shape), dtype=np.float64).T.reshape(-1, 3)
    kept = greedy_suppress(coords, order, min_distance)
    return PointSet.from_coords(channel, coords[kept], values[kept])


def prob_at(prob, coords) -> np.ndarray:
    """Probability at the voxel nearest to each coordinate."""
    arr = as_array(prob)
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
    vox = np.clip(np.rint(coords).astype(np.int64), 0, np.array(arr.shape) - 1)
    return arr[tuple(vox.T)].astype(np.float64)
