import numpy as np
import pytest

from synapsekit.detect import DetectionConfig, PeakConfig, ThresholdConfig, detect, pair_synapses
from synapsekit.targets import TargetConfig, render_targets
from synapsekit.volcore import PointSet, ValidationError


def _planted():
    pre = PointSet.from_coords("pre", [(10, 10, 10), (10, 30, 30), (30, 12, 28)])
    post = PointSet.from_coords("post", [(10, 10, 20), (20, 10, 10), (10, 30, 40), (30, 24, 28)])
    return pre, post


def _as_prob(vol):
    return vol.data.astype(np.float32)


def test_decode_rendered_targets():
    pre, post = _planted()
    shape = (40, 42, 48)
    t_pre, t_post = render_targets(pre, post, shape, TargetConfig(4))
    d_pre, d_post, pairs, _ = detect(_as_prob(t_pre), _as_prob(t_post))
    assert sorted(d_pre.coords.tolist()) == sorted(pre.coords.tolist())
    assert sorted(d_post.coords.tolist()) == sorted(post.coords.tolist())
    ref = pair_synapses(pre, post)

    def links(p):
        return sorted(zip(map(tuple, p.pre_coords().tolist()), map(tuple, p.post_coords().tolist())))
    assert links(pairs) == links(ref)


def test_all_zero():
    z = np.zeros((16, 16, 16), np.float32)
    pre, post, pairs, man = detect(z, z)
    assert len(pre) == len(post) == len(pairs) == 0
    assert man["channels"]["pre"]["threshold_degenerate"]
    assert man["channels"]["pre"]["tau"] == 0.0


def test_shape_mismatch():
    with pytest.raises(ValidationError, match="shape"):
        detect(np.zeros((4, 4, 4), np.float32), np.zeros((4, 4, 5), np.float32))


def test_threads_and_tiles_do_not_change_output():
    r = np.random.default_rng(3)
    a = r.random((40, 36, 30)).astype(np.float32) ** 4
    b = r.random((40, 36, 30)).astype(np.float32) ** 4
    ref = detect(a, b)
    for threads, tile in ((4, (16, 16, 16)), (2, (9, 13, 7))):
        out = detect(a, b, threads=threads, tile=tile)
        assert out[0].equals(ref[0]) and out[1].equals(ref[1])
        assert out[3] == ref[3]


def test_relative_batch_context():
    a = np.zeros((12, 12, 12), np.float32)
    a[6, 6, 6] = 0.4
    b = a.copy()
    b[6, 6, 6] = 1.0
    cfg = DetectionConfig(threshold=ThresholdConfig("relative_batch", rho=0.5))
    alone = detect(a, a, cfg)
    batched = detect(a, a, cfg, context=[(a, a), (b, b)])
    assert len(alone[0]) == 1
    assert len(batched[0]) == 0
    assert batched[3]["channels"]["pre"]["tau"] == 0.5


def test_blob_path():
    from synapsekit.synthgen import render_gaussians
    vol = render_gaussians((32, 32, 32), [(16, 16, 16)], 3.0).astype(np.float32)
    cfg = DetectionConfig(peak=PeakConfig("blob_log"))
    pre, post, pairs, _ = detect(vol, vol, cfg)
    assert pre.coords.tolist() == [[16, 16, 16]]
    assert len(pairs) == 1 and pairs.distances[0] == 0


def test_manifest_fields():
    vol = np.zeros((8, 8, 8), np.float32)
    vol[4, 4, 4] = 1
    *_, man = detect(vol, vol)
    assert man["shape"] == [8, 8, 8]
    assert man["config"] == DetectionConfig().to_dict()
    log = man["channels"]["post"]
    assert set(log) >= {"tau", "foreground_voxels", "components", "candidates", "filtered"}
    assert log["filtered"] == 1 and man["pairs"] == 1
