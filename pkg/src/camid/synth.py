"""Seeded synthetic "devices" with known compression or sensor signatures.

Quantization devices push every 8x8 block of a random scene through a
DCT quantize/dequantize round trip with a device-specific table. PRNU
devices multiply the scene by ``1 + strength * K`` for a fixed
per-device pattern ``K`` and add read noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .core import CamidError, RasterImage
from .ingest import ResizeSpec, resize_bilinear
from .jpeg_features import BLOCK, DCT_MATRIX
from .prnu_features import gaussian_filter

# ITU T.81 Annex K luminance table
STANDARD_LUMA_TABLE = np.array([
    [16, 11, 10, 16, 24, 40, 51, 61],
    [12, 12, 14, 19, 26, 58, 60, 55],
    [14, 13, 16, 24, 40, 57, 69, 56],
    [14, 17, 22, 29, 51, 87, 80, 62],
    [18, 22, 37, 56, 68, 109, 103, 77],
    [24, 35, 55, 64, 81, 104, 113, 92],
    [49, 64, 78, 87, 103, 121, 120, 101],
    [72, 92, 95, 98, 112, 100, 103, 99],
])

DEFAULT_QUALITIES = (95, 75, 50, 25)
READ_NOISE = 1.5  # gray levels


class SynthError(CamidError):
    pass


def quality_table(quality: int) -> np.ndarray:
    """IJG-style scaling of the standard luminance table."""
    if not 1 <= quality <= 100:
        raise SynthError(f"quality must be in [1, 100], got {quality}")
    scale = 5000 / quality if quality < 50 else 200 - 2 * quality
    q = np.floor((STANDARD_LUMA_TABLE * scale + 50) / 100)
    return np.clip(q, 1, 255).astype(np.int64)


@dataclass(frozen=True, eq=False)
class SyntheticDeviceSpec:
    name: str
    seed: int
    qtable: np.ndarray = field(default_factory=lambda: np.ones((8, 8), dtype=np.int64))
    strength: float = 0.0

    def __post_init__(self):
        q = np.asarray(self.qtable)
        if q.shape != (8, 8) or not np.all(q >= 1) or not np.all(q == np.round(q)):
            raise SynthError(f"{self.name}: quantization table must be 8x8 positive integers")
        if not 0.0 <= self.strength <= 0.1:
            raise SynthError(f"{self.name}: pattern strength must lie in [0, 0.1]")
        object.__setattr__(self, "qtable", q.astype(np.int64))

    def pattern(self, height: int, width: int) -> np.ndarray:
        """Zero-mean unit-variance per-device sensor pattern."""
        rng = np.random.default_rng([self.seed, 0xC0FFEE])
        return rng.standard_normal((height, width))

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "qtable": self.qtable.tolist(),
                "strength": self.strength}


def base_scene(rng: np.random.Generator, height: int, width: int, texture: float = 12.0) -> np.ndarray:
    """Smooth mid-gray random field with mild fine texture, roughly in [40, 215]."""
    coarse = rng.uniform(-1, 1, size=(6, 6))
    smooth = resize_bilinear(RasterImage(coarse, 1.0), ResizeSpec(height, width)).pixels
    fine = gaussian_filter(rng.standard_normal((height, width)), 1.2)
    fine /= fine.std() + 1e-12
    scene = 128 + 55 * smooth + texture * rng.uniform(0.8, 1.2) * fine
    return np.clip(scene, 0, 255)


def _image_rng(spec: SyntheticDeviceSpec, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, index])


def quantize_blocks(pixels: np.ndarray, qtable: np.ndarray) -> np.ndarray:
    """DCT, round to the table's lattice, inverse DCT; block-aligned top-left region."""
    h, w = pixels.shape
    hc, wc = h - h % BLOCK, w - w % BLOCK
    out = pixels.astype(np.float64).copy()
    blocks = out[:hc, :wc].reshape(hc // BLOCK, BLOCK, wc // BLOCK, BLOCK).transpose(0, 2, 1, 3)
    coefs = DCT_MATRIX @ blocks @ DCT_MATRIX.T
    coefs = np.round(coefs / qtable) * qtable
    rec = DCT_MATRIX.T @ coefs @ DCT_MATRIX
    out[:hc, :wc] = rec.transpose(0, 2, 1, 3).reshape(hc, wc)
    return np.clip(out, 0, 255)


def gen_quantized_image(spec: SyntheticDeviceSpec, index: int, size=(256, 256)) -> np.ndarray:
    rng = _image_rng(spec, index)
    return quantize_blocks(base_scene(rng, *size), spec.qtable)


def gen_quantized_device_images(spec: SyntheticDeviceSpec, n: int, size=(256, 256)) -> list[np.ndarray]:
    if n < 1:
        raise SynthError("n must be at least 1")
    return [gen_quantized_image(spec, i, size) for i in range(n)]


def gen_prnu_image(spec: SyntheticDeviceSpec, index: int, size=(512, 512),
                   noise: float = READ_NOISE, return_base: bool = False):
    rng = _image_rng(spec, index)
    base = base_scene(rng, *size)
    k = spec.pattern(*size)
    img = np.clip(base * (1 + spec.strength * k) + noise * rng.standard_normal(size), 0, 255)
    return (img, base) if return_base else img


def gen_prnu_device_images(spec: SyntheticDeviceSpec, n: int, size=(512, 512),
                           noise: float = READ_NOISE) -> list[np.ndarray]:
    if n < 1:
        raise SynthError("n must be at least 1")
    return [gen_prnu_image(spec, i, size, noise) for i in range(n)]


def make_devices(mode: str, n_devices: int = 4, seed: int = 42, strength: float = 0.02,
                 qualities=None) -> list[SyntheticDeviceSpec]:
    if n_devices < 1:
        raise SynthError("need at least one device")
    seeds = np.random.SeedSequence(seed).generate_state(n_devices)
    if mode == "quantization":
        qualities = list(qualities or DEFAULT_QUALITIES)
        if len(qualities) < n_devices:
            qualities += [int(q) for q in np.linspace(90, 15, n_devices - len(qualities))]
        return [SyntheticDeviceSpec(f"qdev{i}", int(seeds[i]), quality_table(int(qualities[i])))
                for i in range(n_devices)]
    if mode == "prnu":
        return [SyntheticDeviceSpec(f"pdev{i}", int(seeds[i]), strength=strength)
                for i in range(n_devices)]
    raise SynthError(f"unknown synth mode {mode!r}")


def write_dataset(out_dir, mode: str, devices: list[SyntheticDeviceSpec], per_device: int,
                  size=None, noise: float = READ_NOISE, seed: int | None = None) -> Path:
    """Write ``<out>/<device>/<index>.png`` plus ``manifest.json``."""
    out = Path(out_dir)
    if size is None:
        size = (256, 256) if mode == "quantization" else (512, 512)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SynthError(f"cannot create {out}: {exc}") from exc
    for spec in devices:
        d = out / spec.name
        d.mkdir(exist_ok=True)
        for i in range(per_device):
            if mode == "quantization":
                px = gen_quantized_image(spec, i, size)
            else:
                px = gen_prnu_image(spec, i, size, noise)
            gray = np.round(px).astype(np.uint8)
            Image.fromarray(np.repeat(gray[:, :, None], 3, axis=2)).save(d / f"{i:04d}.png")
    manifest = {
        "mode": mode,
        "seed": seed,
        "per_device": per_device,
        "size": list(size),
        "read_noise": noise if mode == "prnu" else None,
        "devices": [s.to_dict() for s in devices],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return out
