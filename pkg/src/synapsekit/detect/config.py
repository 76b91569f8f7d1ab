"""Detection configuration: dataclasses plus the JSON schema used by the CLI."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import jsonschema

from ..volcore import ValidationError

THRESHOLD_MODES = ("manual", "auto", "relative", "relative_batch")
PEAK_METHODS = ("peak_local_max", "blob_log")
FILTER_MODES = ("none", "by_distance", "by_distance_and_mask")


class ConfigError(ValidationError):
    """Configuration failed schema validation; ``errors`` holds field paths."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class ThresholdConfig:
    mode: str = "relative"
    tau: Optional[float] = None
    rho: float = 0.5


@dataclass
class PeakConfig:
    method: str = "peak_local_max"
    min_distance: int = 5
    threshold_abs: float = 0.0
    sigma_min: float = 1.0
    sigma_max: float = 5.0
    num_sigma: int = 9
    blob_threshold: float = 0.05


@dataclass
class FilterConfig:
    mode: str = "by_distance"
    d_min: float = 8.0


@dataclass
class DetectionConfig:
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    peak: PeakConfig = field(default_factory=PeakConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    pairing_max_distance: float = 120.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "DetectionConfig":
        """Validate ``doc`` and build a config; missing fields take defaults."""
        validate_config(doc)
        doc = dict(doc)
        cfg = cls(
            threshold=ThresholdConfig(**doc.pop("threshold", {})),
            peak=PeakConfig(**doc.pop("peak", {})),
            filter=FilterConfig(**doc.pop("filter", {})),
            **doc,
        )
        validate_config(cfg.to_dict())
        return cfg

    def validate(self) -> "DetectionConfig":
        validate_config(self.to_dict())
        return self


_num = {"type": "number"}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "threshold": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(THRESHOLD_MODES)},
                "tau": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "rho": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "peak": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"enum": list(PEAK_METHODS)},
                "min_distance": {"type": "integer", "minimum": 1},
                "threshold_abs": {"type": "number", "minimum": 0, "maximum": 1},
                "sigma_min": {"type": "number", "exclusiveMinimum": 0},
                "sigma_max": {"type": "number", "exclusiveMinimum": 0},
                "num_sigma": {"type": "integer", "minimum": 1},
                "blob_threshold": _num,
            },
        },
        "filter": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": list(FILTER_MODES)},
                "d_min": {"type": "number", "minimum": 0},
            },
        },
        "pairing_max_distance": {"type": "number", "exclusiveMinimum": 0},
    },
}


def validate_config(doc: dict) -> None:
    """Raise ConfigError listing every violation as ``path: message``."""
    validator = jsonschema.Draft7Validator(SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        errors.append(f"{path}: {err.message}")
    if not errors:
        th = doc.get("threshold", {})
        if th.get("mode") == "manual" and th.get("tau") is None:
            errors.append("threshold.tau: required when threshold.mode is 'manual'")
        peak = doc.get("peak", {})
        if peak.get("sigma_min", 1.0) >= peak.get("sigma_max", 5.0):
            errors.append("peak/sigma_min: must be smaller than peak/sigma_max")
    if errors:
        raise ConfigError(errors)
