"""8x8 block-DCT coefficient statistics as a camera-model signature."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CamidError, RasterImage

BLOCK = 8
N_AC = BLOCK * BLOCK - 1
FEATURE_DIM = 2 * N_AC


class BlockAnalysisError(CamidError):
    pass


def _dct_matrix() -> np.ndarray:
    k = np.arange(BLOCK)
    alpha = np.where(k == 0, 1 / np.sqrt(8), 0.5)
    # rows: frequency u, cols: sample x
    return alpha[:, None] * np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16)


DCT_MATRIX = _dct_matrix()
DCT_MATRIX.setflags(write=False)

# raster (u-major) order of the 63 AC positions
AC_POSITIONS = tuple((u, v) for u in range(BLOCK) for v in range(BLOCK) if (u, v) != (0, 0))
_AC_FLAT = np.array([u * BLOCK + v for u, v in AC_POSITIONS])


@dataclass(frozen=True, eq=False)
class BlockSet:
    blocks: np.ndarray  # (M, 8, 8), blocks[m][x, y] with x the row offset
    height: int
    width: int

    @property
    def count(self) -> int:
        return self.blocks.shape[0]


@dataclass(frozen=True, eq=False)
class BlockDctStats:
    means: np.ndarray  # (63,)
    variances: np.ndarray  # (63,)


def crop_to_block_multiple(img: RasterImage) -> RasterImage:
    if img.channels != 1:
        raise ValueError("block analysis expects a grayscale image")
    h, w = img.height, img.width
    if h < BLOCK or w < BLOCK:
        raise BlockAnalysisError(f"image too small for block analysis ({h}x{w})")
    hc, wc = h - h % BLOCK, w - w % BLOCK
    if (hc, wc) == (h, w):
        return img
    return RasterImage(img.pixels[:hc, :wc], img.value_range)


def partition_blocks(img: RasterImage) -> BlockSet:
    img = crop_to_block_multiple(img)
    h, w = img.height, img.width
    blocks = (
        img.pixels.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK)
        .transpose(0, 2, 1, 3)
        .reshape(-1, BLOCK, BLOCK)
    )
    return BlockSet(blocks, h, w)


def dct2_8x8(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II of one 8x8 block (or a stack of blocks).

    Separable evaluation ``D @ b @ D.T`` of the direct double-cosine sum.
    """
    b = np.asarray(block, dtype=np.float64)
    if b.shape[-2:] != (BLOCK, BLOCK):
        raise ValueError(f"expected trailing shape (8, 8), got {b.shape}")
    return DCT_MATRIX @ b @ DCT_MATRIX.T


def block_stats(blocks: BlockSet) -> BlockDctStats:
    """Per-AC-position mean and unbiased variance over all blocks.

    Two-pass moments on data shifted by the first block's coefficients:
    identical blocks give exactly zero variance, and the reductions use a
    fixed block order with numpy's pairwise summation, so results are
    reproducible bit for bit.
    """
    m = blocks.count
    if m < 2:
        raise BlockAnalysisError(f"insufficient blocks for variance (M={m})")
    coefs = dct2_8x8(blocks.blocks).reshape(m, BLOCK * BLOCK)[:, _AC_FLAT]
    d = coefs - coefs[0]
    dm = d.mean(axis=0)
    var = ((d - dm) ** 2).sum(axis=0) / (m - 1)
    return BlockDctStats(coefs[0] + dm, var)


def jpeg_feature_vector(img: RasterImage) -> np.ndarray:
    """126-dim vector: 63 AC means followed by 63 AC variances."""
    stats = block_stats(partition_blocks(img))
    f = np.concatenate([stats.means, stats.variances])
    if not np.all(np.isfinite(f)):
        raise BlockAnalysisError("non-finite JPEG feature")
    return f


def feature_names() -> list[str]:
    return [f"f{i:03d}" for i in range(FEATURE_DIM)]
