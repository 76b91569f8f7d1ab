"""Site and pair scoring by minimum-cost bipartite matching.

A detection counts as a true positive when it is assigned to a ground-truth
site closer than ``threshold_voxels`` (default 120 voxels). The assignment
minimises the summed Euclidean distance over matched pairs.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .volcore import PointSet, SynapsePairSet, ValidationError

DEFAULT_THRESHOLD = 120.0


@dataclass
class MatchResult:
    """One-to-one matching between detections and truth.

    ``matches`` rows are ``(detected_id, truth_id, distance)`` for assigned
    pairs below the threshold, i.e. the true positives.
    """

    matches: list
    unmatched_detected: np.ndarray
    unmatched_truth: np.ndarray
    tp: int
    fp: int
    fn: int
    threshold_voxels: float

    @property
    def f1(self) -> float:
        return f1(self.tp, self.fp, self.fn)

    @property
    def matched_cost(self) -> float:
        return math.fsum(m[2] for m in self.matches)

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "f1": self.f1,
            "threshold_voxels": self.threshold_voxels,
            "matches": [{"detected_id": int(d), "truth_id": int(t), "distance_voxels": float(c)}
                        for d, t, c in self.matches],
            "unmatched_detected": [int(i) for i in self.unmatched_detected],
            "unmatched_truth": [int(i) for i in self.unmatched_truth],
        }


def f1(tp: int, fp: int, fn: int) -> float:
    """``2 tp / (2 tp + fp + fn)``; 0 when the denominator is 0."""
    if min(tp, fp, fn) < 0:
        raise ValidationError("counts must be non-negative")
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _assign(cost: np.ndarray, valid: np.ndarray, clamp: bool):
    """Row/col indices of a minimum-cost assignment restricted to ``valid`` pairs.

    With ``clamp`` the invalid costs are replaced by a sentinel larger than
    any achievable sum of valid costs, so the solver maximises the number of
    valid matches first and minimises their summed cost second. Without it,
    the raw costs are matched and validity is only checked afterwards.
    """
    if cost.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if clamp:
        bound = float(cost[valid].max()) if valid.any() else 1.0
        sentinel = bound * (min(cost.shape) + 1) + 1.0
        work = np.where(valid, cost, sentinel)
    else:
        work = cost
    rows, cols = linear_sum_assignment(work)
    ok = valid[rows, cols]
    return rows[ok], cols[ok]


def _result(det_ids, truth_ids, rows, cols, dist, threshold) -> MatchResult:
    order = np.argsort(rows, kind="stable")
    rows, cols = rows[order], cols[order]
    matches = [(int(det_ids[r]), int(truth_ids[c]), float(dist[r, c])) for r, c in zip(rows, cols)]
    det_left = np.setdiff1d(np.arange(len(det_ids)), rows)
    truth_left = np.setdiff1d(np.arange(len(truth_ids)), cols)
    tp = len(matches)
    return MatchResult(matches, np.asarray(det_ids)[det_left], np.asarray(truth_ids)[truth_left],
                       tp, len(det_ids) - tp, len(truth_ids) - tp, float(threshold))


def distance_matrix(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    return cdist(a, b)


def match_sites(detected: PointSet, truth: PointSet, threshold_voxels: float = DEFAULT_THRESHOLD,
                clamp: bool = True) -> MatchResult:
    """Hungarian matching of detected to ground-truth sites.

    ``clamp=False`` reproduces the plain formulation (match on raw distances,
    then test each matched distance against the threshold); the default
    clamped form never gives fewer true positives.
    """
    if not threshold_voxels > 0:
        raise ValidationError("threshold_voxels must be positive")
    dist = distance_matrix(detected.coords, truth.coords)
    rows, cols = _assign(dist, dist < threshold_voxels, clamp)
    return _result(detected.ids, truth.ids, rows, cols, dist, threshold_voxels)


def match_pairs(detected: SynapsePairSet, truth: SynapsePairSet,
                threshold_voxels: float = DEFAULT_THRESHOLD, clamp: bool = True) -> MatchResult:
    """Match synapse pairs; both legs must be closer than the threshold.

    Cost of a candidate match is the pre-leg plus post-leg distance. Match
    rows hold ``(detected post id, truth post id, cost)``; post ids identify
    pairs uniquely.
    """
    d_pre = distance_matrix(detected.pre_coords(), truth.pre_coords())
    d_post = distance_matrix(detected.post_coords(), truth.post_coords())
    cost = d_pre + d_post
    valid = (d_pre < threshold_voxels) & (d_post < threshold_voxels)
    rows, cols = _assign(cost, valid, clamp)
    return _result(detected.post_ids, truth.post_ids, rows, cols, cost, threshold_voxels)


FANOUT_CAP = 5


@dataclass
class DegreeHistogram:
    """Posts-per-pre counts: ``exact`` keeps every fan-out, ``binned`` folds >= 5 into "5+"."""

    exact: Dict[int, int]
    binned: Dict[str, int]

    @property
    def total(self) -> int:
        return sum(self.exact.values())


def degree_histogram(pairs: SynapsePairSet) -> DegreeHistogram:
    fanout = Counter(int(p) for p in pairs.pre_ids)
    exact = dict(sorted(Counter(fanout.values()).items()))
    binned: Dict[str, int] = {}
    for k, n in exact.items():
        key = f"{FANOUT_CAP}+" if k >= FANOUT_CAP else str(k)
        binned[key] = binned.get(key, 0) + n
    return DegreeHistogram(exact, binned)


@dataclass
class EvalReport:
    pre: MatchResult
    post: MatchResult
    pairs: Optional[MatchResult] = None
    degrees_detected: Optional[DegreeHistogram] = None
    degrees_truth: Optional[DegreeHistogram] = None
    volume: str = "volume"

    @property
    def f1_pre(self) -> float:
        return self.pre.f1

    @property
    def f1_post(self) -> float:
        return self.post.f1

    @property
    def pairwise_f1(self) -> Optional[float]:
        return None if self.pairs is None else self.pairs.f1

    def to_dict(self) -> dict:
        def hist(h):
            return None if h is None else {"exact": {str(k): v for k, v in h.exact.items()},
                                           "binned": h.binned}
        results = {"pre": self.pre, "post": self.post, "pairs": self.pairs}
        return {
            "volume": self.volume,
            "f1_pre": self.f1_pre,
            "f1_post": self.f1_post,
            "pairwise_f1": self.pairwise_f1,
            "degenerate": [k for k, r in results.items()
                           if r is not None and r.tp + r.fp + r.fn == 0],
            "channels": {k: r.to_dict() for k, r in results.items() if r is not None},
            "degree_histogram": {"detected": hist(self.degrees_detected),
                                 "truth": hist(self.degrees_truth)},
        }

    CSV_FIELDS = ("volume", "channel", "tp", "fp", "fn", "precision", "recall", "f1",
                  "threshold_voxels")

    def csv_rows(self):
        for name, r in (("pre", self.pre), ("post", self.post), ("pairs", self.pairs)):
            if r is None:
                continue
            precision = r.tp / (r.tp + r.fp) if r.tp + r.fp else 0.0
            recall = r.tp / (r.tp + r.fn) if r.tp + r.fn else 0.0
            yield {"volume": self.volume, "channel": name, "tp": r.tp, "fp": r.fp, "fn": r.fn,
                   "precision": precision, "recall": recall, "f1": r.f1,
                   "threshold_voxels": r.threshold_voxels}


def evaluate(det_pre: PointSet, det_post: PointSet, truth_pre: PointSet, truth_post: PointSet,
             det_pairs: Optional[SynapsePairSet] = None,
             truth_pairs: Optional[SynapsePairSet] = None,
             threshold_voxels: float = DEFAULT_THRESHOLD, clamp: bool = True,
             volume: str = "volume") -> EvalReport:
    report = EvalReport(match_sites(det_pre, truth_pre, threshold_voxels, clamp),
                        match_sites(det_post, truth_post, threshold_voxels, clamp),
                        volume=volume)
    if det_pairs is not None and truth_pairs is not None:
        report.pairs = match_pairs(det_pairs, truth_pairs, threshold_voxels, clamp)
    if det_pairs is not None:
        report.degrees_detected = degree_histogram(det_pairs)
    if truth_pairs is not None:
        report.degrees_truth = degree_histogram(truth_pairs)
    return report
