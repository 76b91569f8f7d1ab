"""Synapse detection post-processing, evaluation and synthetic benchmarking for 3D EM."""

__version__ = "0.1.0"

from .volcore import (BlockSpec, FormatError, PointSet, SynapsePairSet, ValidationError,
                      Volume3D, iter_blocks, read_pairs, read_points, read_volume, write_pairs,
                      write_points, write_volume)

__all__ = [
    "BlockSpec", "FormatError", "PointSet", "SynapsePairSet", "ValidationError", "Volume3D",
    "iter_blocks", "read_pairs", "read_points", "read_volume", "write_pairs", "write_points",
    "write_volume", "__version__",
]
