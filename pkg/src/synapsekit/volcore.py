"""Core volume / point types, file I/O and block iteration.

Coordinates are ``(z, y, x)`` everywhere and refer to voxel centres: the
point ``(0, 0, 0)`` sits at the centre of the first voxel of the grid.

File formats
------------
VOL1 volume container
    ``<name>.json`` header::

        {"magic": "VOL1", "shape": [z, y, x], "dtype": "uint8" | "float32",
         "voxel_size_nm": [z, y, x], "kind": "raw" | "prob" | "label"}

    plus ``<name>.raw``: little-endian payload in z-major (C) order.
Points CSV
    header ``id,z,y,x[,score]``, UTF-8, LF line endings.
Pairs JSON
    ``{"pairs": [{"pre_id": int, "post_id": int, "distance_voxels": float}]}``
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Tuple, Union

import numpy as np

PathLike = Union[str, Path]

MAGIC = "VOL1"
DTYPES = {"uint8": np.dtype("<u1"), "float32": np.dtype("<f4")}
KINDS = ("raw", "prob", "label")
PRE, POST = "pre", "post"
CHANNELS = (PRE, POST)


class FormatError(ValueError):
    """A file does not follow the VOL1 / points / pairs format."""


class ValidationError(ValueError):
    """Inputs violate an operation's preconditions."""


# ---------------------------------------------------------------------------
# Volumes
# ---------------------------------------------------------------------------


@dataclass
class Volume3D:
    """Dense 3D scalar grid with voxel-size metadata.

    ``data`` is always a C-contiguous ``uint8`` or ``float32`` array of
    shape ``(z, y, x)``.
    """

    data: np.ndarray
    voxel_size_nm: Tuple[float, float, float] = (8.0, 8.0, 8.0)
    kind: str = "raw"

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"volume must be 3D, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ValidationError(f"volume shape components must be >= 1, got {data.shape}")
        if data.dtype == np.bool_:
            data = data.astype(np.uint8)
        if data.dtype.name not in DTYPES:
            raise ValidationError(f"unsupported dtype {data.dtype}; expected uint8 or float32")
        self.data = np.ascontiguousarray(data)
        vs = tuple(float(v) for v in self.voxel_size_nm)
        if len(vs) != 3 or not all(v > 0 for v in vs):
            raise ValidationError(f"voxel_size_nm must be 3 positive values, got {self.voxel_size_nm}")
        self.voxel_size_nm = vs
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "prob":
            if self.data.dtype != np.float32:
                raise ValidationError("probability volumes must be float32")
            if self.data.size and (self.data.min() < 0 or self.data.max() > 1):
                raise ValidationError("probability volume values must lie in [0, 1]")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return tuple(int(s) for s in self.data.shape)

    @property
    def dtype(self) -> str:
        return self.data.dtype.name

    def header(self) -> dict:
        return {
            "magic": MAGIC,
            "shape": list(self.shape),
            "dtype": self.dtype,
            "voxel_size_nm": list(self.voxel_size_nm),
            "kind": self.kind,
        }


def as_array(vol) -> np.ndarray:
    """Return the ndarray behind ``vol`` (a Volume3D or anything array-like)."""
    if isinstance(vol, Volume3D):
        return vol.data
    arr = np.asarray(vol)
    if arr.ndim != 3:
        raise ValidationError(f"expected a 3D array, got shape {arr.shape}")
    return arr


def volume_paths(path: PathLike) -> Tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".raw"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".json"), p.with_name(p.name + ".raw")


def read_volume(path: PathLike) -> Volume3D:
    """Read a VOL1 volume. ``path`` may be the header, payload or bare prefix."""
    header_path, raw_path = volume_paths(path)
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{header_path}: invalid JSON header ({exc})") from exc
    if not isinstance(header, dict) or header.get("magic") != MAGIC:
        raise FormatError(f"{header_path}: missing VOL1 magic")
    dtype_name = header.get("dtype")
    if dtype_name not in DTYPES:
        raise FormatError(f"{header_path}: unknown dtype {dtype_name!r}")
    shape = header.get("shape")
    if (not isinstance(shape, list) or len(shape) != 3
            or not all(isinstance(s, int) and s >= 1 for s in shape)):
        raise FormatError(f"{header_path}: shape must be three positive integers, got {shape!r}")
    dtype = DTYPES[dtype_name]
    payload = raw_path.read_bytes()
    expected = math.prod(shape) * dtype.itemsize
    if len(payload) != expected:
        raise FormatError(
            f"{raw_path}: payload is {len(payload)} bytes, header implies {expected}")
    data = np.frombuffer(payload, dtype=dtype).reshape(shape)
    data = data.astype(dtype.newbyteorder("="), copy=True)
    data.flags.writeable = False
    try:
        return Volume3D(data, tuple(header.get("voxel_size_nm", (8.0, 8.0, 8.0))),
                        header.get("kind", "raw"))
    except ValidationError as exc:
        raise FormatError(f"{header_path}: {exc}") from exc


def write_volume(vol: Volume3D, path: PathLike) -> None:
    header_path, raw_path = volume_paths(path)
    payload = vol.data.astype(DTYPES[vol.dtype], copy=False).tobytes(order="C")
    try:
        header_path.write_text(json.dumps(vol.header(), indent=2) + "\n", encoding="utf-8")
        raw_path.write_bytes(payload)
    except OSError as exc:
        raise OSError(f"cannot write volume to {header_path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Points and pairs
# ---------------------------------------------------------------------------


@dataclass
class PointSet:
    """Typed 3D point annotations in voxel units.

    Parameters
    ----------
    channel : {"pre", "post"}
    ids : (n,) int64
    coords : (n, 3) float64, ``(z, y, x)`` order
    scores : (n,) float64 or None
    """

    channel: str
    ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    coords: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    scores: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValidationError(f"channel must be 'pre' or 'post', got {self.channel!r}")
        self.ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 3)
        if len(self.ids) != len(self.coords):
            raise ValidationError("ids and coords differ in length")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValidationError("point ids must be unique")
        if self.scores is not None:
            self.scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
            if len(self.scores) != len(self.ids):
                raise ValidationError("scores and ids differ in length")

    @classmethod
    def from_coords(cls, channel: str, coords, scores=None, start_id: int = 1) -> "PointSet":
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 3)
        ids = np.arange(start_id, start_id + len(coords), dtype=np.int64)
        return cls(channel, ids, coords, scores)

    def __len__(self) -> int:
        return len(self.ids)

    def subset(self, keep) -> "PointSet":
        """Points selected by a boolean mask or index array, order preserved."""
        keep = np.asarray(keep)
        scores = None if self.scores is None else self.scores[keep]
        return PointSet(self.channel, self.ids[keep], self.coords[keep], scores)

    def coord_of(self, ids) -> np.ndarray:
        index = {int(i): k for k, i in enumerate(self.ids)}
        return self.coords[[index[int(i)] for i in ids]].reshape(-1, 3)

    def check_inside(self, shape) -> None:
        """Raise ValidationError naming every point outside ``shape``.

        A point is inside when it falls within the extent of some voxel,
        i.e. ``-0.5 <= c < n - 0.5`` on every axis.
        """
        shape = np.asarray(shape, dtype=np.float64)
        bad = np.any((self.coords < -0.5) | (self.coords >= shape - 0.5), axis=1)
        if bad.any():
            raise ValidationError(
                f"{self.channel} points outside volume {tuple(int(s) for s in shape)}: "
                f"ids {self.ids[bad].tolist()}")

    def equals(self, other: "PointSet") -> bool:
        if self.channel != other.channel or len(self) != len(other):
            return False
        if not (np.array_equal(self.ids, other.ids) and np.array_equal(self.coords, other.coords)):
            return False
        if (self.scores is None) != (other.scores is None):
            return False
        return self.scores is None or np.array_equal(self.scores, other.scores)


def _fmt(value: float) -> str:
    return repr(float(value))


def write_points(points: PointSet, path: PathLike) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    has_scores = points.scores is not None
    writer.writerow(["id", "z", "y", "x"] + (["score"] if has_scores else []))
    for k in range(len(points)):
        row = [str(int(points.ids[k]))] + [_fmt(c) for c in points.coords[k]]
        if has_scores:
            row.append(_fmt(points.scores[k]))
        writer.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def read_points(path: PathLike, channel: str) -> PointSet:
    """Read a points CSV. The channel is not stored in the file."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise FormatError(f"{path}: empty points file")
    header = [h.strip() for h in rows[0]]
    if header not in (["id", "z", "y", "x"], ["id", "z", "y", "x", "score"]):
        raise FormatError(f"{path}: header must be id,z,y,x[,score], got {','.join(header)}")
    has_scores = len(header) == 5
    ids, coords, scores = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            ids.append(int(row[0]))
            coords.append([float(v) for v in row[1:4]])
            if has_scores:
                scores.append(float(row[4]))
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric field ({exc})") from exc
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise FormatError(f"{path}: duplicate point ids {dupes}")
    return PointSet(channel, np.array(ids, dtype=np.int64), np.array(coords).reshape(-1, 3),
                    np.array(scores) if has_scores else None)


@dataclass
class SynapsePairSet:
    """Directed pre -> post pairs referencing a PRE and a POST point set.

    Each post id appears at most once; a pre id may fan out to many posts.
    ``unpaired_post_ids`` lists posts that had no pre partner within range.
    """

    pre: PointSet
    post: PointSet
    pre_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    post_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    distances: np.ndarray = field(default_factory=lambda: np.zeros(0))
    unpaired_post_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    def __post_init__(self):
        self.pre_ids = np.asarray(self.pre_ids, dtype=np.int64).reshape(-1)
        self.post_ids = np.asarray(self.post_ids, dtype=np.int64).reshape(-1)
        self.distances = np.asarray(self.distances, dtype=np.float64).reshape(-1)
        self.unpaired_post_ids = np.asarray(self.unpaired_post_ids, dtype=np.int64).reshape(-1)
        if not (len(self.pre_ids) == len(self.post_ids) == len(self.distances)):
            raise ValidationError("pair arrays differ in length")
        if len(np.unique(self.post_ids)) != len(self.post_ids):
            raise ValidationError("a post site may belong to at most one pair")
        missing_pre = set(self.pre_ids.tolist()) - set(self.pre.ids.tolist())
        missing_post = set(self.post_ids.tolist()) - set(self.post.ids.tolist())
        if missing_pre or missing_post:
            raise ValidationError(
                f"pairs reference unknown ids: pre {sorted(missing_pre)}, post {sorted(missing_post)}")

    def __len__(self) -> int:
        return len(self.pre_ids)

    def pre_coords(self) -> np.ndarray:
        return self.pre.coord_of(self.pre_ids)

    def post_coords(self) -> np.ndarray:
        return self.post.coord_of(self.post_ids)

    def recomputed_distances(self) -> np.ndarray:
        return np.linalg.norm(self.pre_coords() - self.post_coords(), axis=1)


def write_pairs(pairs: SynapsePairSet, path: PathLike) -> None:
    doc = {"pairs": [
        {"pre_id": int(a), "post_id": int(b), "distance_voxels": float(d)}
        for a, b, d in zip(pairs.pre_ids, pairs.post_ids, pairs.distances)
    ]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_pairs(path: PathLike, pre: PointSet, post: PointSet) -> SynapsePairSet:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        items = doc["pairs"]
        pre_ids = [int(p["pre_id"]) for p in items]
        post_ids = [int(p["post_id"]) for p in items]
        dists = [float(p["distance_voxels"]) for p in items]
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed pairs file ({exc})") from exc
    try:
        return SynapsePairSet(pre, post, pre_ids, post_ids, dists)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSpec:
    block_shape: Tuple[int, int, int]
    overlap: Tuple[int, int, int] = (0, 0, 0)

    def __post_init__(self):
        if len(self.block_shape) != 3 or len(self.overlap) != 3:
            raise ValidationError("block_shape and overlap need three components")
        for b, o in zip(self.block_shape, self.overlap):
            if b < 1 or o < 0 or o >= b:
                raise ValidationError(
                    f"invalid block spec {self.block_shape} / overlap {self.overlap}")


def block_origins(shape: Sequence[int], spec: BlockSpec):
    """Per-axis block origins (z-major product order is used by iter_blocks)."""
    return [list(range(0, n, b - o)) for n, b, o in zip(shape, spec.block_shape, spec.overlap)]


def block_slices(shape: Sequence[int], spec: BlockSpec) -> Iterator[Tuple[slice, slice, slice]]:
    for origin in itertools.product(*block_origins(shape, spec)):
        yield tuple(slice(o, min(o + b, n)) for o, b, n in zip(origin, spec.block_shape, shape))


def iter_blocks(vol, spec: BlockSpec) -> Iterator[Tuple[Tuple[int, int, int], np.ndarray]]:
    """Yield ``(origin, view)`` tiles of ``vol`` in z-major order over the block grid.

    Blocks at the far boundary are clamped rather than padded. Views are
    read-only.
    """
    arr = as_array(vol)
    for sl in block_slices(arr.shape, spec):
        view = arr[sl].view()
        view.flags.writeable = False
        yield tuple(s.start for s in sl), view


def halo_tiles(shape: Sequence[int], block_shape: Sequence[int], halo: int):
    """Non-overlapping core tiles, each with a halo-expanded read window.

    Yields ``(core, window, inner)`` where ``core`` and ``window`` slice the
    full volume and ``inner`` slices the window array down to the core.
    """
    spec = BlockSpec(tuple(int(b) for b in block_shape))
    for core in block_slices(shape, spec):
        window = tuple(slice(max(c.start - halo, 0), min(c.stop + halo, n))
                       for c, n in zip(core, shape))
        inner = tuple(slice(c.start - w.start, c.stop - w.start) for c, w in zip(core, window))
        yield core, window, inner
