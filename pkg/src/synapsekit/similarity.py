"""Patch extraction, 3D SSIM, cosine similarity and group similarity matrices."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np
from scipy import ndimage

from .volcore import PointSet, ValidationError, as_array

PATCH_SIZE = 32
SSIM_SIGMA = 1.5
SSIM_RADIUS = 5  # 11^3 window
K1, K2 = 0.01, 0.03
DEFAULT_BUDGET = 10_000
DEFAULT_SEED = 0


class DegenerateWarning(UserWarning):
    """A metric fell back to its defined value for degenerate input."""


@dataclass
class PatchSet:
    patches: np.ndarray  # (n, s, s, s) float32
    source_ids: List[str] = field(default_factory=list)
    point_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.patches)


def minmax(patch) -> np.ndarray:
    """Rescale to [0, 1]; a constant patch maps to all zeros."""
    p = np.asarray(patch, dtype=np.float64)
    lo, hi = p.min(), p.max()
    if hi == lo:
        return np.zeros_like(p)
    return (p - lo) / (hi - lo)


def extract_patches(vol, sites: PointSet, size: int = PATCH_SIZE, normalize: bool = True,
                    source_id: str = "volume") -> PatchSet:
    """Cut a ``size``^3 cube around each site (rounded), skipping cubes that do not fit.

    The cube spans ``[c - size/2, c + size/2)`` on each axis.
    """
    if size % 2:
        raise ValidationError(f"patch size must be even, got {size}")
    arr = as_array(vol)
    half = size // 2
    patches, ids, skipped = [], [], 0
    for pid, c in zip(sites.ids, sites.coords):
        start = np.rint(c).astype(np.int64) - half
        stop = start + size
        if np.any(start < 0) or np.any(stop > np.array(arr.shape)):
            skipped += 1
            continue
        cube = arr[start[0]:stop[0], start[1]:stop[1], start[2]:stop[2]]
        cube = minmax(cube) if normalize else np.asarray(cube, dtype=np.float64)
        patches.append(cube.astype(np.float32))
        ids.append(int(pid))
    stack = np.stack(patches) if patches else np.zeros((0, size, size, size), np.float32)
    return PatchSet(stack, [source_id] * len(ids), np.asarray(ids, dtype=np.int64), skipped)


def gaussian_window_1d(sigma: float = SSIM_SIGMA, radius: int = SSIM_RADIUS) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return w / w.sum()


def _window_mean(a: np.ndarray, w1d: np.ndarray) -> np.ndarray:
    out = a
    for axis in range(3):
        out = ndimage.correlate1d(out, w1d, axis=axis, mode="constant")
    r = len(w1d) // 2
    return out[r:-r, r:-r, r:-r]


def ssim_map(a, b, data_range: float = 1.0) -> np.ndarray:
    """SSIM at every position where the 11^3 Gaussian window fits entirely."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"patch shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or min(a.shape) < 2 * SSIM_RADIUS + 1:
        raise ValidationError(f"patches must be 3D and at least {2 * SSIM_RADIUS + 1}^3")
    w = gaussian_window_1d()
    c1, c2 = (K1 * data_range) ** 2, (K2 * data_range) ** 2
    mu_a, mu_b = _window_mean(a, w), _window_mean(b, w)
    var_a = _window_mean(a * a, w) - mu_a ** 2
    var_b = _window_mean(b * b, w) - mu_b ** 2
    cov = _window_mean(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim3d(a, b, data_range: float = 1.0) -> float:
    """Mean single-scale SSIM with a Gaussian window (sigma 1.5, 11^3 support)."""
    return float(ssim_map(a, b, data_range).mean())


def cosine(a, b) -> float:
    """Cosine similarity of the flattened patches; 0 (with a warning) for a zero vector."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValidationError("patch shapes differ")
    na, nb = math.sqrt(float(a @ a)), math.sqrt(float(b @ b))
    if na == 0 or nb == 0:
        warnings.warn("cosine similarity of a zero vector defined as 0", DegenerateWarning)
        return 0.0
    return float(a @ b) / (na * nb)


METRICS = {"ssim": ssim3d, "cosine": cosine}


def _cell_pairs(n_i: int, n_j: int, same: bool, budget: int, rng) -> np.ndarray:
    """Index pairs for one matrix cell; all pairs when within budget, else a sample."""
    total = n_i * (n_i - 1) // 2 if same else n_i * n_j
    if total == 0:
        return np.zeros((0, 2), dtype=np.int64)
    flat = np.arange(total) if total <= budget else np.sort(
        rng.choice(total, size=budget, replace=False))
    if not same:
        return np.stack(np.divmod(flat, n_j), axis=1)
    iu, ju = np.triu_indices(n_i, k=1)
    return np.stack([iu[flat], ju[flat]], axis=1)


def similarity_matrix(groups: Sequence[PatchSet], metric: str = "ssim",
                      budget: int = DEFAULT_BUDGET, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Mean pairwise similarity within (diagonal) and between (off-diagonal) groups.

    Diagonal cells average over distinct within-group pairs, never a patch
    with itself; a group with fewer than two patches gives NaN there. Cells
    with more candidate pairs than ``budget`` use a sample drawn from a
    generator seeded by ``(seed, i, j)``.
    """
    if not groups:
        raise ValidationError("need at least one group")
    fn = METRICS[metric]
    k = len(groups)
    out = np.full((k, k), np.nan)
    for i in range(k):
        for j in range(i, k):
            rng = np.random.default_rng([seed, i, j])
            pairs = _cell_pairs(len(groups[i]), len(groups[j]), i == j, budget, rng)
            if len(pairs) == 0:
                continue
            vals = [fn(groups[i].patches[p], groups[j].patches[q]) for p, q in pairs]
            out[i, j] = out[j, i] = math.fsum(vals) / len(vals)
    return out
