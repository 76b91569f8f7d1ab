import itertools
import math
import warnings

import numpy as np
import pytest

from oracles import ssim_dense_oracle
from synapsekit.similarity import (DegenerateWarning, PatchSet, cosine, extract_patches, minmax,
                                   similarity_matrix, ssim3d)
from synapsekit.volcore import PointSet

C1 = 0.01 ** 2


def test_extract_centre_and_border():
    vol = np.random.default_rng(0).random((64, 64, 64)).astype(np.float32)
    sites = PointSet.from_coords("pre", [(32, 32, 32), (5, 32, 32)])
    ps = extract_patches(vol, sites)
    assert len(ps) == 1 and ps.skipped == 1
    assert ps.patches.shape == (1, 32, 32, 32)
    assert ps.point_ids.tolist() == [1]
    assert ps.patches.min() == 0.0 and ps.patches.max() == 1.0


def test_extract_window_bounds():
    vol = np.arange(40 ** 3, dtype=np.float32).reshape(40, 40, 40)
    ps = extract_patches(vol, PointSet.from_coords("pre", [(16, 20, 24)]), normalize=False)
    np.testing.assert_array_equal(ps.patches[0], vol[0:32, 4:36, 8:40])
    edge = extract_patches(vol, PointSet.from_coords("pre", [(15, 20, 20)]))
    assert len(edge) == 0


def test_constant_patch_normalises_to_zero():
    assert np.all(minmax(np.full((4, 4, 4), 0.3)) == 0)


def test_ssim_identity():
    a = np.random.default_rng(1).random((16, 16, 16))
    assert ssim3d(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_constants():
    a, b = np.zeros((12, 12, 12)), np.ones((12, 12, 12))
    assert ssim3d(a, b) == pytest.approx(C1 / (1 + C1), rel=1e-12)


@pytest.mark.parametrize("seed", range(6))
def test_ssim_matches_dense(seed):
    r = np.random.default_rng(seed)
    a = r.random((14, 13, 12))
    b = np.clip(a + r.normal(0, 0.3, a.shape), 0, 1) if seed % 2 else r.random(a.shape)
    assert abs(ssim3d(a, b) - ssim_dense_oracle(a, b)) < 1e-6
    assert ssim3d(a, b) == pytest.approx(ssim3d(b, a), abs=1e-12)


def test_cosine():
    a = np.random.default_rng(2).random((5, 5, 5))
    assert cosine(a, a) == pytest.approx(1.0, abs=1e-12)
    assert abs(cosine(a, 7.5 * a) - cosine(a, a)) < 1e-9
    e1, e2 = np.zeros(8), np.zeros(8)
    e1[0], e2[3] = 1, 1
    assert cosine(e1, e2) == 0.0
    with pytest.warns(DegenerateWarning):
        assert cosine(np.zeros(8), e1) == 0.0


def _group(patches):
    return PatchSet(np.asarray(patches, np.float32))


def test_matrix_single_group():
    p = np.random.default_rng(3).random((12, 12, 12))
    m = similarity_matrix([_group([p, p])])
    assert m.shape == (1, 1) and m[0, 0] == pytest.approx(1.0)


def test_matrix_identity_for_orthogonal_groups():
    e1, e2 = np.zeros((2, 2, 2)), np.zeros((2, 2, 2))
    e1[0, 0, 0], e2[1, 1, 1] = 1, 1
    m = similarity_matrix([_group([e1, e1]), _group([e2, e2, e2])], metric="cosine")
    np.testing.assert_allclose(m, [[1, 0], [0, 1]])


def test_matrix_small_groups_exhaustive():
    r = np.random.default_rng(4)
    g = [_group(r.random((n, 12, 12, 12))) for n in (3, 4)]
    m = similarity_matrix(g)
    within = [ssim3d(g[1].patches[i], g[1].patches[j]) for i, j in itertools.combinations(range(4), 2)]
    cross = [ssim3d(p, q) for p in g[0].patches for q in g[1].patches]
    assert m[1, 1] == pytest.approx(math.fsum(within) / len(within), abs=1e-12)
    assert m[0, 1] == m[1, 0] == pytest.approx(math.fsum(cross) / len(cross), abs=1e-12)


def test_matrix_sampling_is_seeded():
    r = np.random.default_rng(5)
    g = [_group(r.random((12, 4, 4, 4))), _group(r.random((10, 4, 4, 4)))]
    a = similarity_matrix(g, "cosine", budget=7, seed=11)
    b = similarity_matrix(g, "cosine", budget=7, seed=11)
    c = similarity_matrix(g, "cosine", budget=7, seed=12)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_matrix_missing_cell():
    p = np.ones((2, 2, 2))
    m = similarity_matrix([_group([p]), _group([p, p])], "cosine")
    assert math.isnan(m[0, 0])
    assert m[0, 1] == pytest.approx(1.0) and m[1, 1] == pytest.approx(1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        similarity_matrix([_group([p, p])], "cosine")
