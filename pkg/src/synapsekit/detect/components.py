"""26-connected component labelling with canonical, deterministic label order."""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from ..volcore import BlockSpec, as_array, block_slices

STRUCTURE_26 = np.ones((3, 3, 3), dtype=bool)


@dataclass
class ComponentLabels:
    """Label volume plus per-component statistics.

    Labels run 1..count (0 is background), ordered by each component's
    smallest linear voxel index. Arrays indexed by ``label - 1``.
    """

    labels: np.ndarray
    count: int
    sizes: np.ndarray
    centroids: np.ndarray
    max_positions: Optional[np.ndarray] = None


def canonicalize(labels: np.ndarray) -> np.ndarray:
    """Relabel so labels ascend with each component's first voxel in C order."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq != 0
    uniq, first = uniq[keep], first[keep]
    order = np.argsort(first, kind="stable")
    lut = np.zeros(int(flat.max()) + 1 if flat.size else 1, dtype=np.uint32)
    lut[uniq[order]] = np.arange(1, len(uniq) + 1, dtype=np.uint32)
    return lut[labels]


def _stats(labels: np.ndarray, count: int, prob=None) -> ComponentLabels:
    flat = labels.ravel().astype(np.int64)
    sizes = np.bincount(flat, minlength=count + 1)[1:]
    centroids = np.zeros((count, 3))
    if count:
        fg = np.flatnonzero(flat)
        idx = np.unravel_index(fg, labels.shape)
        for axis in range(3):
            sums = np.bincount(flat[fg], weights=idx[axis].astype(np.float64),
                               minlength=count + 1)[1:]
            centroids[:, axis] = sums / sizes
    max_positions = None
    if prob is not None:
        values = np.asarray(as_array(prob), dtype=np.float64).ravel()
        fg = np.flatnonzero(flat)
        # sort by label, then value descending, then linear index ascending
        order = np.lexsort((fg, -values[fg], flat[fg]))
        fg_sorted = fg[order]
        lab_sorted = flat[fg_sorted]
        starts = np.flatnonzero(np.r_[True, lab_sorted[1:] != lab_sorted[:-1]]) if len(fg) else []
        max_positions = np.array(np.unravel_index(fg_sorted[starts], labels.shape)).T.reshape(-1, 3)
    return ComponentLabels(labels, count, sizes, centroids, max_positions)


def connected_components(mask, prob=None) -> ComponentLabels:
    """Label the 26-connected foreground components of ``mask``.

    If ``prob`` is given, ``max_positions`` holds each component's highest
    probability voxel (ties: smallest linear index).
    """
    arr = as_array(mask) != 0
    raw, _ = ndimage.label(arr, structure=STRUCTURE_26)
    labels = canonicalize(raw)
    count = int(labels.max()) if labels.size else 0
    return _stats(labels, count, prob)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # smaller root wins, keeps merges order independent
            if ra < rb:
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _boundaries(shape, block_shape):
    """Per-axis indices p such that voxels p and p+1 lie in different blocks."""
    return [list(range(b - 1, n - 1, b)) for n, b in zip(shape, block_shape)]


def _seam_pairs(labels: np.ndarray, axis: int, p: int):
    """Label pairs (a, b) of 26-adjacent foreground voxels across plane p|p+1."""
    a = np.take(labels, p, axis=axis)
    b = np.take(labels, p + 1, axis=axis)
    h, w = a.shape
    out = []
    for du, dv in itertools.product((-1, 0, 1), repeat=2):
        sa = a[max(0, -du):h - max(0, du), max(0, -dv):w - max(0, dv)]
        sb = b[max(0, du):h - max(0, -du), max(0, dv):w - max(0, -dv)]
        both = (sa != 0) & (sb != 0)
        if both.any():
            out.append(np.stack([sa[both], sb[both]], axis=1))
    return out


def connected_components_blockwise(mask, block_shape: Sequence[int], threads: int = 1,
                                   prob=None) -> ComponentLabels:
    """Block-parallel labelling followed by a sequential union-find seam merge.

    Produces the same partition and canonical labels as
    :func:`connected_components` for any block shape and thread count.
    """
    arr = as_array(mask) != 0
    tiles = list(block_slices(arr.shape, BlockSpec(tuple(int(b) for b in block_shape))))

    def label_tile(sl):
        return ndimage.label(arr[sl], structure=STRUCTURE_26)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(label_tile, tiles))
    else:
        results = [label_tile(sl) for sl in tiles]

    labels = np.zeros(arr.shape, dtype=np.int64)
    offset = 0
    for sl, (local, n) in zip(tiles, results):
        labels[sl] = np.where(local > 0, local + offset, 0)
        offset += n

    uf = UnionFind(offset + 1)
    for axis, planes in enumerate(_boundaries(arr.shape, block_shape)):
        for p in planes:
            for pairs in _seam_pairs(labels, axis, p):
                for a, b in np.unique(pairs, axis=0):
                    uf.union(int(a), int(b))
    lut = np.array([uf.find(i) for i in range(offset + 1)], dtype=np.int64)
    merged = canonicalize(lut[labels])
    count = int(merged.max()) if merged.size else 0
    return _stats(merged, count, prob)
