"""Decode probability maps into synaptic sites and pre -> post pairs."""

from .blobs import blob_log, log_stack
from .components import (ComponentLabels, connected_components,
                         connected_components_blockwise)
from .config import (ConfigError, DetectionConfig, FilterConfig, PeakConfig,
                     ThresholdConfig, validate_config)
from .filtering import filter_points
from .pairing import nearest_pre, pair_synapses
from .peaks import greedy_suppress, local_maxima_mask, peak_local_max
from .pipeline import detect, detect_channel
from .threshold import ThresholdResult, otsu_threshold, threshold

__all__ = [
    "ComponentLabels", "ConfigError", "DetectionConfig", "FilterConfig", "PeakConfig",
    "ThresholdConfig", "ThresholdResult", "blob_log", "connected_components",
    "connected_components_blockwise", "detect", "detect_channel", "filter_points",
    "greedy_suppress", "local_maxima_mask", "log_stack", "nearest_pre", "otsu_threshold",
    "pair_synapses", "peak_local_max", "threshold", "validate_config",
]
