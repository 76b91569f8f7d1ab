"""End-to-end decoding of pre/post probability maps into sites and pairs."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

from ..volcore import POST, PRE, PointSet, ValidationError, as_array
from .blobs import blob_log
from .components import connected_components_blockwise
from .config import DetectionConfig
from .filtering import filter_points
from .pairing import pair_synapses
from .peaks import DEFAULT_TILE, peak_local_max
from .threshold import threshold


def detect_channel(prob, cfg: DetectionConfig, channel: str, context=None,
                   threads: int = 1, tile=DEFAULT_TILE) -> Tuple[PointSet, dict]:
    """Threshold, find points and filter one channel; returns points and a stage log."""
    th = threshold(prob, cfg.threshold, context)
    comps = connected_components_blockwise(th.mask, tile, threads=threads)
    if cfg.peak.method == "peak_local_max":
        raw = peak_local_max(prob, cfg.peak.min_distance, cfg.peak.threshold_abs,
                             mask=th.mask, channel=channel, threads=threads, tile=tile)
    elif cfg.peak.method == "blob_log":
        raw = blob_log(prob, cfg.peak.sigma_min, cfg.peak.sigma_max, cfg.peak.num_sigma,
                       cfg.peak.blob_threshold, channel=channel, mask=th.mask)
    else:
        raise ValidationError(f"unknown peak method {cfg.peak.method!r}")
    kept = filter_points(raw, cfg.filter, mask=th.mask)
    kept = PointSet.from_coords(channel, kept.coords, kept.scores)
    log = {
        "tau": th.tau,
        "threshold_degenerate": th.degenerate,
        "foreground_voxels": int(th.mask.sum()),
        "components": comps.count,
        "candidates": len(raw),
        "filtered": len(kept),
    }
    return kept, log


def detect(pre_prob, post_prob, cfg: Optional[DetectionConfig] = None,
           context: Optional[Sequence] = None, threads: int = 1, tile=DEFAULT_TILE):
    """Decode a pair of probability maps.

    Parameters
    ----------
    pre_prob, post_prob : Volume3D or ndarray
        Probability maps of identical shape.
    cfg : DetectionConfig
    context : sequence of (pre, post) volumes, optional
        Batch used by ``relative_batch`` thresholding; defaults to this pair.
    threads : int
        Worker threads for the voxel-level stages. Output does not depend on it.

    Returns
    -------
    pre, post : PointSet
    pairs : SynapsePairSet
    manifest : dict
        Resolved config, per-channel threshold and stage counts.
    """
    cfg = (cfg or DetectionConfig()).validate()
    pre_arr, post_arr = as_array(pre_prob), as_array(post_prob)
    if pre_arr.shape != post_arr.shape:
        raise ValidationError(f"shape mismatch: pre {pre_arr.shape} vs post {post_arr.shape}")
    ctx_pre = [c[0] for c in context] if context else None
    ctx_post = [c[1] for c in context] if context else None
    pre, pre_log = detect_channel(pre_arr, cfg, PRE, ctx_pre, threads, tile)
    post, post_log = detect_channel(post_arr, cfg, POST, ctx_post, threads, tile)
    pairs = pair_synapses(pre, post, cfg.pairing_max_distance)
    manifest = {
        "config": cfg.to_dict(),
        "shape": list(pre_arr.shape),
        "channels": {PRE: pre_log, POST: post_log},
        "pairs": len(pairs),
        "unpaired_post": len(pairs.unpaired_post_ids),
    }
    return pre, post, pairs, manifest
