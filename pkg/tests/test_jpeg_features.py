import math

import numpy as np
import pytest

from camid.core import RasterImage
from camid.jpeg_features import (AC_POSITIONS, DCT_MATRIX, BlockAnalysisError, BlockSet, block_stats,
                                 crop_to_block_multiple, dct2_8x8, jpeg_feature_vector,
                                 partition_blocks)


def alpha(k):
    return 1 / math.sqrt(8) if k == 0 else 0.5


def naive_dct(b):
    """Direct quadruple loop over the defining double cosine sum."""
    out = [[0.0] * 8 for _ in range(8)]
    for u in range(8):
        for v in range(8):
            s = 0.0
            for x in range(8):
                for y in range(8):
                    s += (b[x][y] * math.cos((2 * x + 1) * u * math.pi / 16)
                          * math.cos((2 * y + 1) * v * math.pi / 16))
            out[u][v] = alpha(u) * alpha(v) * s
    return np.array(out)


def gray(px):
    return RasterImage(np.asarray(px, dtype=float))


def test_constant_block():
    c = dct2_8x8(np.ones((8, 8)))
    assert c[0, 0] == pytest.approx(8.0, abs=1e-12)
    c[0, 0] = 0
    assert np.max(np.abs(c)) < 1e-12


def test_single_cosine_block():
    x = np.arange(8)
    b = np.repeat(np.cos((2 * x + 1) * np.pi / 16)[:, None], 8, axis=1)
    expected = naive_dct(b.tolist())
    assert expected[1, 0] == pytest.approx(4 * math.sqrt(2), abs=1e-12)
    got = dct2_8x8(b)
    assert got[1, 0] == pytest.approx(5.656854249492381, abs=1e-12)
    got[1, 0] = 0
    assert np.max(np.abs(got)) < 1e-12


def test_random_blocks_match_naive_loop(rng):
    for _ in range(5):
        b = rng.uniform(0, 255, (8, 8))
        np.testing.assert_allclose(dct2_8x8(b), naive_dct(b.tolist()), rtol=0, atol=1e-9)


def test_parseval(rng):
    b = rng.uniform(0, 255, (50, 8, 8))
    c = dct2_8x8(b)
    np.testing.assert_allclose((c**2).sum(axis=(1, 2)), (b**2).sum(axis=(1, 2)), rtol=1e-6)


def test_dct_rejects_wrong_shape():
    with pytest.raises(ValueError):
        dct2_8x8(np.zeros((7, 8)))


def test_crop_750_by_1000():
    img = gray(np.zeros((750, 1000)))
    cropped = crop_to_block_multiple(img)
    assert (cropped.height, cropped.width) == (744, 1000)
    assert partition_blocks(img).count == 93 * 125 == 11625


def test_crop_identity_and_too_small():
    img = gray(np.zeros((8, 8)))
    assert crop_to_block_multiple(img) is img
    with pytest.raises(BlockAnalysisError, match="too small"):
        crop_to_block_multiple(gray(np.zeros((7, 64))))


def test_partition_keeps_block_contents(rng):
    px = rng.uniform(0, 255, (24, 17))
    bs = partition_blocks(gray(px))
    assert bs.count == 3 * 2
    np.testing.assert_array_equal(bs.blocks[3], px[8:16, 8:16])


def test_identical_blocks_have_zero_variance(rng):
    b = rng.uniform(0, 255, (8, 8))
    stats = block_stats(BlockSet(np.stack([b] * 5), 8, 40))
    assert np.all(stats.variances == 0)
    flat = naive_dct(b.tolist())
    np.testing.assert_allclose(stats.means, [flat[u, v] for u, v in AC_POSITIONS], atol=1e-9)


def test_two_point_variance():
    coefs = [np.zeros((8, 8)), np.zeros((8, 8))]
    coefs[0][0, 1], coefs[1][0, 1] = 1.0, 3.0
    blocks = np.stack([DCT_MATRIX.T @ c @ DCT_MATRIX for c in coefs])
    stats = block_stats(BlockSet(blocks, 8, 16))
    assert AC_POSITIONS[0] == (0, 1)
    assert stats.means[0] == pytest.approx(2.0, abs=1e-12)
    assert stats.variances[0] == pytest.approx(2.0, abs=1e-12)


def test_stats_need_two_blocks():
    with pytest.raises(BlockAnalysisError, match="insufficient"):
        block_stats(BlockSet(np.zeros((1, 8, 8)), 8, 8))


def test_stats_match_streaming_recomputation(rng):
    px = rng.uniform(0, 255, (32, 40))
    stats = block_stats(partition_blocks(gray(px)))
    # Welford over blocks in scan order, naive transform
    n = 0
    mean = np.zeros(63)
    m2 = np.zeros(63)
    for bi in range(0, 32, 8):
        for bj in range(0, 40, 8):
            c = naive_dct(px[bi:bi + 8, bj:bj + 8].tolist())
            x = np.array([c[u, v] for u, v in AC_POSITIONS])
            n += 1
            d = x - mean
            mean += d / n
            m2 += d * (x - mean)
    np.testing.assert_allclose(stats.means, mean, atol=1e-9)
    np.testing.assert_allclose(stats.variances, m2 / (n - 1), rtol=1e-9)


def test_stats_reproducible(rng):
    img = gray(rng.uniform(0, 255, (64, 64)))
    a = jpeg_feature_vector(img)
    b = jpeg_feature_vector(img)
    assert a.tobytes() == b.tobytes()


def test_feature_layout(rng):
    f = jpeg_feature_vector(gray(rng.uniform(0, 255, (40, 48))))
    assert f.shape == (126,)
    assert np.all(np.isfinite(f))
    assert np.all(f[63:] >= 0)


def test_constant_image_features_vanish():
    f = jpeg_feature_vector(gray(np.full((64, 64), 137.0)))
    assert np.max(np.abs(f)) < 1e-10


def test_brightness_shift_invariance(rng):
    px = rng.uniform(20, 200, (64, 80))
    np.testing.assert_allclose(jpeg_feature_vector(gray(px + 10)), jpeg_feature_vector(gray(px)),
                               rtol=0, atol=1e-9)


def test_cropped_remainder_is_ignored(rng):
    px = rng.uniform(0, 255, (67, 77))
    a = jpeg_feature_vector(gray(px))
    b = jpeg_feature_vector(gray(px[:64, :72]))
    assert a.tobytes() == b.tobytes()
