"""PRNU-style sensor pattern extraction from a single grayscale image.

The pattern is the Gaussian high-pass residual with its Wiener-shrunk
component removed, read out on a fixed sub-grid of a centre crop.

The residual R and the shrunk estimate R_hat are snapped (toward zero) to
a common power-of-two grid sized from max|R|. Both then carry at most 52
significant bits over that grid, so ``K = R - R_hat`` is computed without
rounding and ``K + R_hat == R`` holds bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .core import CamidError, RasterImage


class PrnuError(CamidError):
    pass


@dataclass(frozen=True)
class PrnuConfig:
    sigma_residual: float = 1.0
    sigma_window: float = 2.0
    noise_floor: float = 0.01
    crop: int = 512
    stride: int = 8

    def __post_init__(self):
        if self.sigma_residual <= 0 or self.sigma_window <= 0:
            raise PrnuError("Gaussian sigmas must be positive")
        if self.noise_floor <= 0:
            raise PrnuError("noise_floor must be positive")
        if self.crop < 1 or self.stride < 1:
            raise PrnuError("crop and stride must be positive integers")
        if self.crop % self.stride:
            raise PrnuError(f"crop {self.crop} is not a multiple of stride {self.stride}")

    @property
    def output_dim(self) -> int:
        return (self.crop // self.stride) ** 2

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class LocalMoments:
    mean: np.ndarray
    variance: np.ndarray


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    if sigma <= 0:
        raise PrnuError(f"Gaussian sigma must be positive, got {sigma}")
    radius = math.ceil(4 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t**2) / (2 * sigma**2))
    return k / k.sum()


def _convolve_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    r = len(kernel) // 2
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    # symmetric = mirror including the edge sample (d c b a | a b c d)
    padded = np.pad(a, pad, mode="symmetric")
    n = a.shape[axis]
    # a + sum w_i (shift_i(a) - a): equal to sum w_i shift_i(a) since the
    # weights sum to 1, and exact on constant input
    acc = np.zeros_like(a)
    for i, w in enumerate(kernel):
        if i == r:
            continue
        acc += w * (np.take(padded, np.arange(i, i + n), axis=axis) - a)
    return a + acc


def gaussian_filter(img, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, radius ceil(4 sigma), mirrored borders."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("gaussian_filter expects a 2-D grid")
    k = gaussian_kernel1d(sigma)
    return _convolve_axis(_convolve_axis(a, k, 0), k, 1)


def center_crop(pixels: np.ndarray, size: int) -> np.ndarray:
    h, w = pixels.shape[:2]
    if h < size or w < size:
        raise PrnuError(f"image too small for PRNU analysis ({h}x{w} < {size}x{size})")
    top = (h - size) // 2
    left = (w - size) // 2
    return pixels[top : top + size, left : left + size]


def normalized_gray(img: RasterImage) -> np.ndarray:
    if img.channels != 1:
        raise ValueError("PRNU analysis expects a grayscale image")
    return img.pixels / img.value_range


def _grid_step(r: np.ndarray) -> float:
    # |R_hat| <= |R - mu| <= 2 max|R|, so |K| <= 3 max|R| < 2**e
    peak = 3.0 * float(np.max(np.abs(r))) if r.size else 0.0
    if peak == 0.0:
        return 1.0
    e = math.frexp(peak)[1]
    return math.ldexp(1.0, e - 52)


def _snap(a: np.ndarray, step: float) -> np.ndarray:
    return np.trunc(a / step) * step


def residual(gray: np.ndarray, cfg: PrnuConfig) -> np.ndarray:
    """High-frequency residual ``I - G * I`` of an already-cropped [0, 1] grid."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.shape[0] < cfg.crop or gray.shape[1] < cfg.crop:
        raise PrnuError(f"image too small for PRNU analysis ({gray.shape[0]}x{gray.shape[1]})")
    r = gray - gaussian_filter(gray, cfg.sigma_residual)
    return _snap(r, _grid_step(r))


def local_moments(r: np.ndarray, cfg: PrnuConfig) -> LocalMoments:
    mu = gaussian_filter(r, cfg.sigma_window)
    var = np.maximum(gaussian_filter(r * r, cfg.sigma_window) - mu * mu, 0.0)
    return LocalMoments(mu, var)


def wiener_shrink(r: np.ndarray, moments: LocalMoments, noise_floor: float) -> np.ndarray:
    if noise_floor <= 0:
        raise PrnuError("noise_floor must be positive")
    gain = moments.variance / (moments.variance + noise_floor)
    return _snap((r - moments.mean) * gain, _grid_step(r))


def prnu_pattern(gray: np.ndarray, cfg: PrnuConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(K, R, R_hat)`` with ``K = R - R_hat``."""
    r = residual(gray, cfg)
    r_hat = wiener_shrink(r, local_moments(r, cfg), cfg.noise_floor)
    return r - r_hat, r, r_hat


def prnu_feature_vector(img: RasterImage, cfg: PrnuConfig = PrnuConfig()) -> np.ndarray:
    """Centre crop, extract the pattern, flatten row-major and keep a fixed stride.

    The flat stride is ``stride**2``, so ``crop**2 / stride**2`` entries remain.
    """
    gray = center_crop(normalized_gray(img), cfg.crop)
    k, _, _ = prnu_pattern(gray, cfg)
    g = k.ravel()[:: cfg.stride * cfg.stride].copy()
    if not np.all(np.isfinite(g)):
        raise PrnuError("non-finite PRNU feature")
    return g


def feature_names(cfg: PrnuConfig = PrnuConfig()) -> list[str]:
    return [f"g{i:04d}" for i in range(cfg.output_dim)]


def normalized_correlation(a: np.ndarray, b: np.ndarray) -> float:
    a = np.ravel(a) - np.mean(a)
    b = np.ravel(b) - np.mean(b)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom > 0 else 0.0
