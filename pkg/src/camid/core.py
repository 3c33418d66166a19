"""Domain types shared by the three identification pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Sequence

import numpy as np


class CamidError(Exception):
    """Base class for errors raised by this package."""


class DecodeError(CamidError):
    def __init__(self, path, reason):
        self.path = Path(path)
        super().__init__(f"{self.path}: {reason}")


@dataclass(frozen=True)
class DeviceLabel:
    name: str
    index: int


def make_labels(names: Sequence[str]) -> list[DeviceLabel]:
    """Assign class ids by lexicographic rank of the device names."""
    ordered = sorted(names)
    if len(set(ordered)) != len(ordered):
        raise ValueError(f"duplicate device names in {list(names)}")
    return [DeviceLabel(name, i) for i, name in enumerate(ordered)]


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Pixel grid of shape (H, W) or (H, W, 3), stored as float64.

    ``value_range`` is 255.0 for images in [0, 255] and 1.0 for images
    in [0, 1].
    """

    pixels: np.ndarray
    value_range: float = 255.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim == 3 and px.shape[2] == 1:
            px = px[:, :, 0]
        if px.ndim not in (2, 3) or (px.ndim == 3 and px.shape[2] != 3):
            raise ValueError(f"unsupported pixel array shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if self.value_range not in (1.0, 255.0):
            raise ValueError(f"value_range must be 1.0 or 255.0, got {self.value_range}")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.pixels.ndim == 2 else 3

    def audit(self, slack: float = 1e-9) -> None:
        """Raise if pixel values fall outside the declared range."""
        lo, hi = float(self.pixels.min()), float(self.pixels.max())
        if not np.isfinite(lo) or not np.isfinite(hi):
            raise ValueError("non-finite pixel values")
        if lo < -slack or hi > self.value_range + slack:
            raise ValueError(
                f"pixel range [{lo}, {hi}] outside declared [0, {self.value_range}]"
            )


@dataclass(frozen=True)
class ImageRecord:
    path: Path
    label: DeviceLabel


@dataclass(frozen=True)
class Dataset:
    records: tuple[ImageRecord, ...]
    labels: tuple[DeviceLabel, ...]
    skipped: tuple[Path, ...] = ()

    def __post_init__(self):
        known = set(self.labels)
        for rec in self.records:
            if rec.label not in known:
                raise ValueError(f"record {rec.path} has unknown label {rec.label.name}")

    @property
    def label_indices(self) -> np.ndarray:
        return np.array([r.label.index for r in self.records], dtype=np.int64)

    @property
    def label_names(self) -> list[str]:
        return [lab.name for lab in self.labels]

    def counts(self) -> dict[str, int]:
        out = {lab.name: 0 for lab in self.labels}
        for rec in self.records:
            out[rec.label.name] += 1
        return out


@dataclass(frozen=True)
class SplitIndices:
    train: tuple[int, ...]
    test: tuple[int, ...]
    seed: int
    ratio: float


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    label_indices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        y = np.asarray(self.label_indices, dtype=np.int64)
        if v.ndim != 2:
            raise ValueError(f"feature matrix must be 2-D, got shape {v.shape}")
        if y.shape != (v.shape[0],):
            raise ValueError("one label per row required")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains non-finite entries")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "label_indices", y)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def take(self, idx) -> "FeatureMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return FeatureMatrix(self.values[idx], self.label_indices[idx])


ModelKind = Literal["jpeg-svm", "prnu-svm", "cnn"]


@dataclass(frozen=True)
class TrainedModel:
    """A fitted classifier plus everything needed to reapply it.

    ``payload`` is a ``MulticlassSvm`` for the SVM kinds and a
    ``CnnModel`` for ``cnn``; ``preprocessing`` holds the standardizer or
    the extraction/resize settings.
    """

    kind: ModelKind
    label_names: tuple[str, ...]
    payload: Any
    preprocessing: dict = field(default_factory=dict)
