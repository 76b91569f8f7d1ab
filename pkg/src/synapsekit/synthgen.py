"""Seeded synthetic ground truth: planted pre/post sites and noisy probability maps.

Random numbers come from numpy's PCG64 bit generator
(``np.random.default_rng(seed)``), consumed in this fixed order:

1. fan-out per synapse, one ``rng.choice`` call for all synapses;
2. synapses in order: a pre dart (``rng.integers``, one triple), then for
   each of its posts a direction (``rng.normal``, 3 values) and radius
   (``rng.uniform``) per attempt; the synapse is redrawn from a fresh dart
   if any post cannot be placed;
3. clutter, per channel (pre then post): count (``rng.poisson``), then one
   integer triple and one peak value per blob attempt;
4. noise, per channel (pre then post): one ``rng.normal`` call over the grid.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Tuple

import numpy as np

from .volcore import POST, PRE, PointSet, SynapsePairSet, ValidationError, Volume3D

SYNAPSE_ATTEMPTS = 5000
POST_ATTEMPTS = 50


class PackingError(ValidationError):
    """The requested configuration cannot be placed in the volume."""


@dataclass
class SynthConfig:
    shape: Tuple[int, int, int] = (128, 128, 128)
    n_synapses: int = 40
    fanout_distribution: Dict[int, float] = field(
        default_factory=lambda: {1: 0.4, 2: 0.3, 3: 0.2, 4: 0.1})
    pre_post_distance_range_voxels: Tuple[float, float] = (6.0, 14.0)
    blob_sigma_voxels: float = 3.0
    noise_std: float = 0.05
    clutter_density: float = 1.0  # blobs per 10^6 voxels, per channel
    clutter_peak_range: Tuple[float, float] = (0.1, 0.4)
    min_separation_voxels: float = 17.0  # between any two post sites
    min_pre_separation_voxels: float = 26.0  # between pre sites, leaves room for fan-out
    pairing_margin_voxels: float = 3.0  # own pre must be this much nearer than any other
    border_margin_voxels: int = 4
    seed: int = 0

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.fanout_distribution = {int(k): float(v) for k, v in self.fanout_distribution.items()}
        self.pre_post_distance_range_voxels = tuple(
            float(v) for v in self.pre_post_distance_range_voxels)
        self.clutter_peak_range = tuple(float(v) for v in self.clutter_peak_range)
        self.validate()

    def validate(self) -> None:
        errs = []
        if len(self.shape) != 3 or min(self.shape) < 1:
            errs.append(f"shape must be three positive ints, got {self.shape}")
        if self.n_synapses < 0:
            errs.append("n_synapses must be >= 0")
        probs = list(self.fanout_distribution.values())
        if not probs or any(p < 0 for p in probs) or not math.isclose(sum(probs), 1.0, abs_tol=1e-9):
            errs.append("fanout_distribution probabilities must be >= 0 and sum to 1")
        if any(k < 1 for k in self.fanout_distribution):
            errs.append("fan-out values must be >= 1")
        lo, hi = self.pre_post_distance_range_voxels
        if not 0 < lo <= hi:
            errs.append("pre_post_distance_range_voxels must satisfy 0 < min <= max")
        if self.blob_sigma_voxels <= 0:
            errs.append("blob_sigma_voxels must be positive")
        if self.noise_std < 0 or self.clutter_density < 0:
            errs.append("noise_std and clutter_density must be >= 0")
        if not 0 <= self.clutter_peak_range[0] <= self.clutter_peak_range[1] <= 0.5:
            errs.append("clutter_peak_range must lie within [0, 0.5]")
        if self.min_separation_voxels <= 0:
            errs.append("min_separation_voxels must be positive")
        if self.min_pre_separation_voxels < self.min_separation_voxels:
            errs.append("min_pre_separation_voxels must be >= min_separation_voxels")
        if errs:
            raise ValidationError("; ".join(errs))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        d["fanout_distribution"] = {str(k): v for k, v in sorted(self.fanout_distribution.items())}
        d["pre_post_distance_range_voxels"] = list(self.pre_post_distance_range_voxels)
        d["clutter_peak_range"] = list(self.clutter_peak_range)
        return d

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise ValidationError(f"unknown synth config fields: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class SynthResult:
    pre: PointSet
    post: PointSet
    pairs: SynapsePairSet
    pre_prob: Volume3D
    post_prob: Volume3D


def _try_post(cfg: SynthConfig, pre, other_pres, posts, rng):
    """One post around ``pre`` respecting range, bounds, separation and pairing margin."""
    dmin, dmax = cfg.pre_post_distance_range_voxels
    m = cfg.border_margin_voxels
    upper = np.array(cfg.shape) - 1 - m
    for _attempt in range(POST_ATTEMPTS):
        u = rng.normal(size=3)
        r = rng.uniform(dmin, dmax)
        norm = np.linalg.norm(u)
        if norm == 0:
            continue
        p = np.rint(pre + r * u / norm)
        if np.any(p < m) or np.any(p > upper):
            continue
        d_own = np.linalg.norm(p - pre)
        if not dmin <= d_own <= dmax:
            continue
        if len(other_pres) and np.min(np.linalg.norm(other_pres - p, axis=1)) < d_own + cfg.pairing_margin_voxels:
            continue
        if len(posts) and np.min(np.sum((posts - p) ** 2, axis=1)) < cfg.min_separation_voxels ** 2:
            continue
        return p
    return None


def _place_synapses(cfg: SynthConfig, fanout: np.ndarray, rng):
    """Dart-throw whole synapses (a pre plus its fan-out of posts).

    A candidate pre must keep ``min_pre_separation_voxels`` from placed pres
    and must not become the nearest pre (within the pairing margin) of any
    placed post. If its posts cannot be placed the synapse is redrawn.
    """
    m = cfg.border_margin_voxels
    lo = np.array([m] * 3)
    hi = np.array(cfg.shape) - m
    if len(fanout) and np.any(hi <= lo):
        raise PackingError(f"shape {cfg.shape} leaves no room inside border margin {m}")
    pres = np.zeros((0, 3))
    posts = np.zeros((0, 3))
    owners = np.zeros(0, dtype=np.int64)
    post_own_dist = np.zeros(0)
    for i, k in enumerate(fanout):
        for _attempt in range(SYNAPSE_ATTEMPTS):
            pre = rng.integers(lo, hi).astype(np.float64)
            if len(pres) and np.min(np.sum((pres - pre) ** 2, axis=1)) < cfg.min_pre_separation_voxels ** 2:
                continue
            if len(posts) and np.any(np.linalg.norm(posts - pre, axis=1)
                                     < post_own_dist + cfg.pairing_margin_voxels):
                continue
            mine = []
            for _ in range(int(k)):
                p = _try_post(cfg, pre, pres, np.vstack([posts] + mine) if mine else posts, rng)
                if p is None:
                    break
                mine.append(p[None])
            if len(mine) < k:
                continue
            mine = np.vstack(mine)
            pres = np.vstack([pres, pre])
            posts = np.vstack([posts, mine])
            owners = np.r_[owners, [i] * int(k)]
            post_own_dist = np.r_[post_own_dist, np.linalg.norm(mine - pre, axis=1)]
            break
        else:
            raise PackingError(
                f"placed only {i} of {len(fanout)} synapses in shape {cfg.shape}: pre separation "
                f"{cfg.min_pre_separation_voxels}, post separation {cfg.min_separation_voxels}, "
                f"pre-post distance {cfg.pre_post_distance_range_voxels}, "
                f"pairing margin {cfg.pairing_margin_voxels} (after {SYNAPSE_ATTEMPTS} attempts)")
    return pres, posts, owners


def add_gaussian(out: np.ndarray, center, sigma: float, peak: float = 1.0) -> None:
    """Accumulate an isotropic Gaussian (truncated at 4 sigma) into ``out`` in place."""
    reach = int(math.ceil(4 * sigma))
    c = np.rint(center).astype(np.int64)
    lo = np.maximum(c - reach, 0)
    hi = np.minimum(c + reach + 1, out.shape)
    if np.any(hi <= lo):
        return
    zz, yy, xx = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    d2 = (zz - center[0]) ** 2 + (yy - center[1]) ** 2 + (xx - center[2]) ** 2
    out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] += peak * np.exp(-d2 / (2.0 * sigma ** 2))


def render_gaussians(shape, centers, sigma: float, peaks=None) -> np.ndarray:
    out = np.zeros(shape, dtype=np.float64)
    for k, c in enumerate(np.asarray(centers, dtype=np.float64).reshape(-1, 3)):
        add_gaussian(out, c, sigma, 1.0 if peaks is None else float(peaks[k]))
    return out


def _clutter(cfg: SynthConfig, sites: np.ndarray, rng):
    n = int(rng.poisson(cfg.clutter_density * math.prod(cfg.shape) / 1e6))
    centers, peaks = [], []
    sep2 = cfg.min_separation_voxels ** 2
    for _ in range(n):
        for _attempt in range(100):
            p = rng.integers(0, cfg.shape).astype(np.float64)
            v = rng.uniform(*cfg.clutter_peak_range)
            if len(sites) == 0 or np.min(np.sum((sites - p) ** 2, axis=1)) >= sep2:
                centers.append(p)
                peaks.append(v)
                break
    return np.array(centers).reshape(-1, 3), np.array(peaks)


def generate(cfg: SynthConfig) -> SynthResult:
    """Plant synapses and render noisy pre/post probability maps.

    Deterministic for a given config (including ``seed``).
    """
    rng = np.random.default_rng(cfg.seed)
    keys = np.array(sorted(cfg.fanout_distribution))
    probs = np.array([cfg.fanout_distribution[k] for k in keys])
    fanout = rng.choice(keys, size=cfg.n_synapses, p=probs / probs.sum())
    pres, posts, owners = _place_synapses(cfg, fanout, rng)

    pre = PointSet.from_coords(PRE, pres)
    post = PointSet.from_coords(POST, posts)
    dist = np.linalg.norm(pres[owners] - posts, axis=1) if len(posts) else np.zeros(0)
    pairs = SynapsePairSet(pre, post, pre.ids[owners] if len(owners) else [], post.ids, dist)

    volumes = []
    for sites in (pres, posts):
        grid = render_gaussians(cfg.shape, sites, cfg.blob_sigma_voxels)
        centers, peaks = _clutter(cfg, sites, rng)
        for c, v in zip(centers, peaks):
            add_gaussian(grid, c, cfg.blob_sigma_voxels, v)
        volumes.append(grid)
    for grid in volumes:
        np.clip(grid, 0.0, 1.0, out=grid)
        if cfg.noise_std > 0:
            grid += rng.normal(0.0, cfg.noise_std, size=cfg.shape)
            np.clip(grid, 0.0, 1.0, out=grid)
    pre_prob, post_prob = (Volume3D(g.astype(np.float32), kind="prob") for g in volumes)
    return SynthResult(pre, post, pairs, pre_prob, post_prob)


def corrupt_labels(truth: PointSet, drop_rate: float = 0.0, jitter_std: float = 0.0,
                   seed: int = 0) -> PointSet:
    """Simulate annotation noise: drop points at ``drop_rate``, jitter the rest.

    Draws one uniform per point, then one normal triple per survivor.
    Surviving points keep their ids.
    """
    if not (0 <= drop_rate < 1) or jitter_std < 0:
        raise ValidationError("need 0 <= drop_rate < 1 and jitter_std >= 0")
    rng = np.random.default_rng(seed)
    keep = rng.random(len(truth)) >= drop_rate
    out = truth.subset(keep)
    if jitter_std > 0 and len(out):
        out.coords = out.coords + rng.normal(0.0, jitter_std, size=out.coords.shape)
    return out
