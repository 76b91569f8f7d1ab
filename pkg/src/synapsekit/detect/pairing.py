"""Nearest-neighbour pre -> post pairing (polyadic fan-out allowed)."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..volcore import PointSet, SynapsePairSet

BRUTE_FORCE_LIMIT = 64


def nearest_pre(pre: PointSet, post: PointSet, method: str = "auto"):
    """For every post point, the index into ``pre`` of its nearest pre point.

    Equidistant pre points resolve to the smallest pre id. ``method`` is
    ``"kdtree"``, ``"brute"`` or ``"auto"`` (brute force for small sets).
    Returns ``(index, distance)`` arrays; both methods give identical output.
    """
    n_pre, n_post = len(pre), len(post)
    if n_pre == 0 or n_post == 0:
        return np.zeros(n_post, dtype=np.int64), np.full(n_post, np.inf)
    if method == "auto":
        method = "brute" if n_pre * n_post <= BRUTE_FORCE_LIMIT ** 2 else "kdtree"
    if method == "brute":
        d2 = np.sum((post.coords[:, None, :] - pre.coords[None, :, :]) ** 2, axis=2)
        best = np.empty(n_post, dtype=np.int64)
        for j in range(n_post):
            ties = np.flatnonzero(d2[j] == d2[j].min())
            best[j] = ties[np.argmin(pre.ids[ties])]
    elif method == "kdtree":
        tree = cKDTree(pre.coords)
        d, _ = tree.query(post.coords, k=1)
        best = np.empty(n_post, dtype=np.int64)
        for j in range(n_post):
            near = np.asarray(tree.query_ball_point(post.coords[j], d[j] * (1 + 1e-9) + 1e-9),
                              dtype=np.int64)
            d2 = np.sum((pre.coords[near] - post.coords[j]) ** 2, axis=1)
            ties = near[d2 == d2.min()]
            best[j] = ties[np.argmin(pre.ids[ties])]
    else:
        raise ValueError(f"unknown method {method!r}")
    dist = np.sqrt(np.sum((pre.coords[best] - post.coords) ** 2, axis=1))
    return best, dist


def pair_synapses(pre: PointSet, post: PointSet, max_distance: float = 120.0,
                  method: str = "auto") -> SynapsePairSet:
    """Pair each post site with its nearest pre site within ``max_distance``.

    Posts farther than ``max_distance`` from every pre stay unpaired and are
    listed in ``unpaired_post_ids``. Pairs are ordered by post order.
    """
    best, dist = nearest_pre(pre, post, method)
    ok = dist <= max_distance
    return SynapsePairSet(pre, post, pre.ids[best[ok]] if len(pre) else np.zeros(0, np.int64),
                          post.ids[ok], dist[ok], post.ids[~ok])
