"""Axis-aligned boxes and frames."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBox, EmptyFrame


@dataclass(frozen=True)
class BoundingBox:
    """Top-left corner ``(x, y)`` and size ``(w, h)``, 0-based pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DegenerateBox(f"box needs positive size, got w={self.w}, h={self.h}")
        if not np.all(np.isfinite([self.x, self.y, self.w, self.h])):
            raise DegenerateBox("box coordinates must be finite")

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def clipped(self, width: int, height: int) -> "BoundingBox":
        """Intersection with the frame; boxes fully outside shrink to a 1 px box at the nearest edge."""
        x0 = min(max(self.x, 0.0), width - 1.0)
        y0 = min(max(self.y, 0.0), height - 1.0)
        x1 = max(min(self.x + self.w, float(width)), x0 + 1.0)
        y1 = max(min(self.y + self.h, float(height)), y0 + 1.0)
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


@dataclass
class Frame:
    pixels: np.ndarray
    bit_depth_origin: int = 8

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2 or self.pixels.size == 0:
            raise EmptyFrame(f"frame must be a nonempty 2-D array, got shape {self.pixels.shape}")
        if self.bit_depth_origin not in (8, 16):
            raise ValueError("bit_depth_origin must be 8 or 16")

    @classmethod
    def from_raw(cls, img: np.ndarray) -> "Frame":
        """Normalize an 8- or 16-bit image (or a float image in [0, 1])."""
        img = np.asarray(img)
        if img.dtype == np.uint16:
            pix, depth = img / 65535.0, 16
        elif img.dtype == np.uint8:
            pix, depth = img / 255.0, 8
        else:
            pix, depth = np.clip(img.astype(np.float64), 0.0, 1.0), 8
        if pix.ndim == 3:
            pix = pix.mean(axis=2)
        return cls(pix, depth)

    @property
    def shape(self):
        return self.pixels.shape
