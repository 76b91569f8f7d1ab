"""Probability-map binarisation: manual, Otsu, relative and batch-relative."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..volcore import ValidationError, as_array
from .config import ThresholdConfig

OTSU_BINS = 256


@dataclass
class ThresholdResult:
    mask: np.ndarray
    tau: float
    degenerate: bool = False  # all-zero input; mask forced empty


def otsu_threshold(values, nbins: int = OTSU_BINS) -> float:
    """Otsu threshold over an ``nbins`` histogram spanning ``[min, max]``.

    Returns the upper edge of the last background bin, so that
    ``values >= tau`` selects exactly the foreground bins. Ties in
    between-class variance resolve to the lowest split.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        return lo
    hist, edges = np.histogram(values, bins=nbins, range=(lo, hi))
    centers = (edges[:-1] + edges[1:]) / 2
    w0 = np.cumsum(hist)[:-1].astype(np.float64)
    w1 = values.size - w0
    s0 = np.cumsum(hist * centers)[:-1]
    total = float(np.sum(hist * centers))
    with np.errstate(divide="ignore", invalid="ignore"):
        m0 = s0 / w0
        m1 = (total - s0) / w1
        between = w0 * w1 * (m0 - m1) ** 2
    between = np.where((w0 > 0) & (w1 > 0), between, -1.0)
    k = int(np.argmax(between))
    return float(edges[k + 1])


def threshold(prob, cfg: ThresholdConfig, context: Optional[Sequence] = None) -> ThresholdResult:
    """Binarise ``prob`` with ``mask = prob >= tau``.

    ``context`` is the batch of volumes whose global maximum scales the
    ``relative_batch`` threshold; it defaults to ``[prob]``. For the
    data-driven modes an all-zero input yields an empty mask with
    ``tau = 0`` and ``degenerate=True``.
    """
    arr = np.asarray(as_array(prob), dtype=np.float64)
    mode = cfg.mode
    peak = float(arr.max()) if arr.size else 0.0
    if mode == "manual":
        if cfg.tau is None:
            raise ValidationError("manual thresholding needs tau")
        tau = float(cfg.tau)
        return ThresholdResult(arr >= tau, tau)
    if mode == "relative_batch":
        batch = [arr] if not context else [as_array(v) for v in context]
        peak = max(float(v.max()) for v in batch)
    if peak <= 0:
        return ThresholdResult(np.zeros(arr.shape, dtype=bool), 0.0, True)
    if mode == "auto":
        tau = otsu_threshold(arr)
    elif mode in ("relative", "relative_batch"):
        tau = float(cfg.rho) * peak
    else:
        raise ValidationError(f"unknown threshold mode {mode!r}")
    return ThresholdResult(arr >= tau, tau)
