"""Dataset scanning, decoding and the per-pipeline pixel representations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .core import CamidError, Dataset, DecodeError, ImageRecord, RasterImage, make_labels

log = logging.getLogger(__name__)

SUPPORTED_EXTENSIONS = (".jpg", ".jpeg", ".png", ".ppm")
HEIF_EXTENSIONS = (".heic", ".heif")

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class DatasetError(CamidError):
    pass


@dataclass(frozen=True)
class ResizeSpec:
    height: int = 128
    width: int = 128

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError("resize target must be at least 1x1")


def scan_dataset(root) -> Dataset:
    """Build a Dataset from a ``<root>/<device>/<image>`` tree.

    Files with unsupported extensions are skipped and listed in
    ``Dataset.skipped``. A device directory holding no supported image
    is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root not found: {root}")
    device_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not device_dirs:
        raise DatasetError(f"no device directories under {root}")

    labels = make_labels([d.name for d in device_dirs])
    by_name = {lab.name: lab for lab in labels}
    records: list[ImageRecord] = []
    skipped: list[Path] = []
    for d in device_dirs:
        files = sorted(p for p in d.iterdir() if p.is_file())
        found = 0
        for f in files:
            if f.suffix.lower() in SUPPORTED_EXTENSIONS:
                records.append(ImageRecord(f, by_name[d.name]))
                found += 1
            else:
                skipped.append(f)
        if found == 0:
            raise DatasetError(f"no supported images in device directory {d}")
    if skipped:
        log.warning("skipped %d files with unsupported extensions", len(skipped))
    records.sort(key=lambda r: str(r.path))
    return Dataset(tuple(records), tuple(labels), tuple(skipped))


def decode_image(path) -> RasterImage:
    """Decode a JPEG/PNG/PPM file to an RGB image in [0, 255]."""
    path = Path(path)
    if path.suffix.lower() in HEIF_EXTENSIONS:
        raise DecodeError(path, "HEIC/HEIF is not decoded here; pre-convert required (e.g. to PNG)")
    try:
        with Image.open(path) as im:
            im.load()
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise DecodeError(path, f"cannot decode image ({exc})") from exc
    return RasterImage(rgb.astype(np.float64), 255.0)


def to_grayscale(img: RasterImage) -> RasterImage:
    """BT.601 luma, kept in float without rounding. Gray input passes through."""
    if img.channels == 1:
        return img
    y = img.pixels @ LUMA_WEIGHTS
    return RasterImage(y, img.value_range)


def _axis_weights(n_src: int, n_dst: int):
    scale = n_src / n_dst
    src = (np.arange(n_dst) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_src - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_src - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(img: RasterImage, spec: ResizeSpec = ResizeSpec()) -> RasterImage:
    """Bilinear resize with half-pixel centres and edge clamping, scaled to [0, 1]."""
    px = img.pixels
    y0, y1, fy = _axis_weights(img.height, spec.height)
    x0, x1, fx = _axis_weights(img.width, spec.width)
    if px.ndim == 3:
        fy = fy[:, None, None]
        fx = fx[None, :, None]
    else:
        fy = fy[:, None]
        fx = fx[None, :]
    top = px[y0][:, x0] * (1 - fx) + px[y0][:, x1] * fx
    bottom = px[y1][:, x0] * (1 - fx) + px[y1][:, x1] * fx
    out = top * (1 - fy) + bottom * fy
    return RasterImage(out / img.value_range, 1.0)


def cnn_input(img: RasterImage, spec: ResizeSpec = ResizeSpec()) -> np.ndarray:
    """(H, W, 3) float array in [0, 1] ready for the CNN."""
    if img.channels == 1:
        img = RasterImage(np.repeat(img.pixels[:, :, None], 3, axis=2), img.value_range)
    return resize_bilinear(img, spec).pixels
