"""Grayscale intensity images in [0, 1] and their PNG round-trip."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ShapeError


@dataclass(frozen=True, eq=False)
class IntensityImage:
    """An H x W grayscale image; values are finite floats in [0, 1].

    The backing array is copied and frozen, so instances can be shared
    between threads without defensive copies.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ShapeError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensity values must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensity values must lie in [0, 1]")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_array(cls, values) -> "IntensityImage":
        """Build an image from any finite real array, clamping into [0, 1]."""
        arr = np.asarray(values, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensity values must be finite")
        return cls(np.clip(arr, 0.0, 1.0))

    @property
    def h(self) -> int:
        return self.values.shape[0]

    @property
    def w(self) -> int:
        return self.values.shape[1]


def save_png(image: IntensityImage, path) -> None:
    """Write an 8-bit grayscale PNG; pixel value = round(255 * intensity)."""
    data = np.round(image.values * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path, format="PNG")


def load_png(path) -> IntensityImage:
    """Read a PNG as grayscale intensities in [0, 1]; color inputs are converted."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return IntensityImage(arr / 255.0)
