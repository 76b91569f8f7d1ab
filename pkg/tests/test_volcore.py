import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from synapsekit.volcore import (BlockSpec, FormatError, PointSet, SynapsePairSet,
                                ValidationError, Volume3D, iter_blocks, read_pairs, read_points,
                                read_volume, write_pairs, write_points, write_volume)


def test_read_fixed_uint8(tmp_path):
    (tmp_path / "v.json").write_text(
        '{"magic":"VOL1","shape":[2,2,2],"dtype":"uint8","voxel_size_nm":[8,8,8],"kind":"raw"}')
    (tmp_path / "v.raw").write_bytes(bytes(range(8)))
    vol = read_volume(tmp_path / "v.json")
    assert vol.shape == (2, 2, 2)
    assert vol.data[0, 0, 0] == 0 and vol.data[1, 1, 1] == 7
    # z-major: x varies fastest
    assert vol.data[0, 0, 1] == 1 and vol.data[1, 0, 0] == 4


def test_truncated_payload(tmp_path):
    (tmp_path / "v.json").write_text(
        '{"magic":"VOL1","shape":[2,2,2],"dtype":"uint8","voxel_size_nm":[8,8,8],"kind":"raw"}')
    (tmp_path / "v.raw").write_bytes(bytes(7))
    with pytest.raises(FormatError, match="payload"):
        read_volume(tmp_path / "v")


def test_unknown_dtype(tmp_path):
    (tmp_path / "v.json").write_text(
        '{"magic":"VOL1","shape":[1,1,1],"dtype":"int16","voxel_size_nm":[8,8,8],"kind":"raw"}')
    (tmp_path / "v.raw").write_bytes(bytes(2))
    with pytest.raises(FormatError, match="dtype"):
        read_volume(tmp_path / "v")


def test_float_zeros_payload_size(tmp_path):
    write_volume(Volume3D(np.zeros((4, 4, 4), np.float32), kind="prob"), tmp_path / "z")
    assert (tmp_path / "z.raw").stat().st_size == 256


def test_payload_is_little_endian(tmp_path):
    write_volume(Volume3D(np.full((1, 1, 1), 1.0, np.float32)), tmp_path / "one")
    assert (tmp_path / "one.raw").read_bytes() == np.array([1.0], "<f4").tobytes()


def test_axes_not_permuted(tmp_path):
    data = np.arange(2 * 3 * 5, dtype=np.uint8).reshape(2, 3, 5)
    write_volume(Volume3D(data, (30.0, 8.0, 4.0)), tmp_path / "asym")
    back = read_volume(tmp_path / "asym")
    assert back.shape == (2, 3, 5)
    assert back.voxel_size_nm == (30.0, 8.0, 4.0)
    np.testing.assert_array_equal(back.data, data)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([np.uint8, np.float32]),
       hnp.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=6),
       st.integers(0, 2 ** 32 - 1))
def test_volume_roundtrip_bytes(tmp_path_factory, dtype, shape, seed):
    tmp = tmp_path_factory.mktemp("rt")
    r = np.random.default_rng(seed)
    if dtype is np.uint8:
        data = r.integers(0, 256, shape).astype(np.uint8)
    else:
        data = r.standard_normal(shape).astype(np.float32)
    write_volume(Volume3D(data), tmp / "a")
    vol = read_volume(tmp / "a.json")
    np.testing.assert_array_equal(vol.data, data)
    write_volume(vol, tmp / "b")
    assert (tmp / "a.raw").read_bytes() == (tmp / "b.raw").read_bytes()
    assert (tmp / "a.json").read_bytes() == (tmp / "b.json").read_bytes()


def test_prob_volume_range_checked():
    with pytest.raises(ValidationError):
        Volume3D(np.full((2, 2, 2), 1.5, np.float32), kind="prob")


def test_read_points_single(tmp_path):
    (tmp_path / "p.csv").write_text("id,z,y,x\n1,0,0,0\n")
    pts = read_points(tmp_path / "p.csv", "pre")
    assert len(pts) == 1 and pts.channel == "pre"
    np.testing.assert_array_equal(pts.coords, [[0, 0, 0]])


def test_read_points_duplicate_id(tmp_path):
    (tmp_path / "p.csv").write_text("id,z,y,x\n1,0,0,0\n1,1,1,1\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_points(tmp_path / "p.csv", "pre")


def test_read_points_non_numeric(tmp_path):
    (tmp_path / "p.csv").write_text("id,z,y,x\n1,0,a,0\n")
    with pytest.raises(FormatError):
        read_points(tmp_path / "p.csv", "post")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 30), st.booleans(), st.integers(0, 2 ** 32 - 1))
def test_points_roundtrip(tmp_path_factory, n, with_scores, seed):
    tmp = tmp_path_factory.mktemp("pts")
    r = np.random.default_rng(seed)
    ids = r.permutation(1000)[:n]
    pts = PointSet("post", ids, r.uniform(-5, 200, (n, 3)), r.random(n) if with_scores else None)
    write_points(pts, tmp / "p.csv")
    raw = (tmp / "p.csv").read_bytes()
    assert b"\r" not in raw
    back = read_points(tmp / "p.csv", "post")
    assert back.equals(pts)


def test_pairs_roundtrip(tmp_path):
    pre = PointSet.from_coords("pre", [[0, 0, 0], [10, 10, 10]])
    post = PointSet.from_coords("post", [[0, 0, 3], [0, 4, 0], [10, 10, 12]])
    pairs = SynapsePairSet(pre, post, [1, 1, 2], [1, 2, 3], [3.0, 4.0, 2.0])
    write_pairs(pairs, tmp_path / "pairs.json")
    back = read_pairs(tmp_path / "pairs.json", pre, post)
    np.testing.assert_array_equal(back.pre_ids, [1, 1, 2])
    np.testing.assert_allclose(back.recomputed_distances(), back.distances, atol=1e-6)


def test_pairs_post_used_twice():
    pre = PointSet.from_coords("pre", [[0, 0, 0], [1, 1, 1]])
    post = PointSet.from_coords("post", [[0, 0, 3]])
    with pytest.raises(ValidationError):
        SynapsePairSet(pre, post, [1, 2], [1, 1], [3.0, 3.0])


def test_single_block():
    blocks = list(iter_blocks(np.zeros((10, 10, 10)), BlockSpec((10, 10, 10))))
    assert len(blocks) == 1 and blocks[0][0] == (0, 0, 0)


def test_clamped_small_volume():
    blocks = list(iter_blocks(np.zeros((5, 5, 5)), BlockSpec((8, 8, 8))))
    assert len(blocks) == 1 and blocks[0][1].shape == (5, 5, 5)


def test_block_origins_with_overlap():
    blocks = list(iter_blocks(np.zeros((10, 10, 10)), BlockSpec((6, 6, 6), (2, 2, 2))))
    zs = sorted({o[0] for o, _ in blocks})
    assert zs == [0, 4, 8]
    assert blocks[-1][1].shape == (2, 2, 2)


def test_blocks_read_only():
    _, view = next(iter_blocks(np.zeros((4, 4, 4)), BlockSpec((2, 2, 2))))
    with pytest.raises(ValueError):
        view[0, 0, 0] = 1


def test_block_spec_validation():
    with pytest.raises(ValidationError):
        BlockSpec((4, 4, 4), (4, 0, 0))


@settings(max_examples=60, deadline=None)
@given(hnp.array_shapes(min_dims=3, max_dims=3, min_side=1, max_side=12),
       st.tuples(*[st.integers(1, 7)] * 3), st.data())
def test_block_coverage(shape, block, data):
    overlap = tuple(data.draw(st.integers(0, b - 1)) for b in block)
    vol = np.arange(np.prod(shape)).reshape(shape)
    covered = np.zeros(shape, dtype=int)
    origins = []
    for origin, view in iter_blocks(vol, BlockSpec(block, overlap)):
        sl = tuple(slice(o, o + s) for o, s in zip(origin, view.shape))
        np.testing.assert_array_equal(vol[sl], view)
        covered[sl] += 1
        origins.append(origin)
    assert covered.min() >= 1
    assert origins == sorted(origins)
    # adjacent blocks along each axis share exactly `overlap` voxels, except at the clamped end
    for axis in range(3):
        starts = sorted({o[axis] for o in origins})
        for a, b in zip(starts, starts[1:]):
            end_a = min(a + block[axis], shape[axis])
            if a + block[axis] <= shape[axis]:
                assert end_a - b == overlap[axis]


def test_points_outside_named():
    pts = PointSet.from_coords("pre", [[0, 0, 0], [9.6, 0, 0], [-1, 0, 0]])
    with pytest.raises(ValidationError, match=r"\[2, 3\]"):
        pts.check_inside((10, 10, 10))


def test_block_order_is_z_major():
    origins = [o for o, _ in iter_blocks(np.zeros((4, 4, 4)), BlockSpec((2, 2, 2)))]
    assert origins == list(itertools.product([0, 2], [0, 2], [0, 2]))
