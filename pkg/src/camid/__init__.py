"""Source camera identification from JPEG block statistics, PRNU residuals and a small CNN."""

__version__ = "0.1.0"

from .core import (CamidError, Dataset, DecodeError, DeviceLabel, FeatureMatrix, ImageRecord,
                   RasterImage, SplitIndices, TrainedModel)

__all__ = [
    "CamidError",
    "Dataset",
    "DecodeError",
    "DeviceLabel",
    "FeatureMatrix",
    "ImageRecord",
    "RasterImage",
    "SplitIndices",
    "TrainedModel",
    "__version__",
]
