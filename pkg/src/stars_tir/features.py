"""Search-window extraction and HOG + intensity features."""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .boxes import BoundingBox, Frame
from .errors import DegenerateBox, IndivisibleDimensions, InvalidConfig
from .numerics import cosine_window


@dataclass(frozen=True)
class FeatureConfig:
    cell_size: int = 4
    orientation_bins: int = 9
    window: int = 64  # model window side in samples
    clip: float = 0.2

    def __post_init__(self):
        if self.cell_size < 1 or self.orientation_bins < 1 or self.window < 2 * self.cell_size:
            raise InvalidConfig("cell_size, orientation_bins must be >= 1 and window >= 2 cells")
        if self.window % self.cell_size:
            raise InvalidConfig("window must be a multiple of cell_size")


@dataclass
class FeatureTensor:
    data: np.ndarray
    cell_size: int
    window_applied: bool

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def extract_patch(frame, bbox: BoundingBox, padding: float, out_size=(64, 64)) -> np.ndarray:
    """Crop the padded window around ``bbox`` and resize it to ``out_size`` (h, w).

    Pixels outside the frame replicate the nearest edge pixel.
    """
    if not (bbox.w > 0 and bbox.h > 0):
        raise DegenerateBox(f"box needs positive size, got {bbox}")
    pix = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=float)
    H, W = pix.shape
    cx, cy = bbox.center
    sw = max(1, int(round(bbox.w * (1.0 + padding))))
    sh = max(1, int(round(bbox.h * (1.0 + padding))))
    x0 = int(np.floor(cx - sw / 2.0 + 0.5))
    y0 = int(np.floor(cy - sh / 2.0 + 0.5))
    cols = np.clip(np.arange(x0, x0 + sw), 0, W - 1)
    rows = np.clip(np.arange(y0, y0 + sh), 0, H - 1)
    crop = pix[np.ix_(rows, cols)]
    oh, ow = out_size
    if crop.shape == (oh, ow):
        return crop.copy()
    return cv2.resize(crop, (ow, oh), interpolation=cv2.INTER_LINEAR)


def _orientation_votes(patch: np.ndarray, bins: int) -> np.ndarray:
    # centred differences; gx runs along columns (image x), gy along rows
    gy, gx = np.gradient(patch)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    pos = theta / (np.pi / bins)
    lo = np.floor(pos).astype(int)
    frac = pos - lo
    lo %= bins
    hi = (lo + 1) % bins
    votes = np.zeros(patch.shape + (bins,))
    r, c = np.indices(patch.shape)
    np.add.at(votes, (r, c, lo), mag * (1.0 - frac))
    np.add.at(votes, (r, c, hi), mag * frac)
    return votes


def _cell_sum(a: np.ndarray, cell: int) -> np.ndarray:
    h, w = a.shape[:2]
    return a.reshape(h // cell, cell, w // cell, cell, *a.shape[2:]).sum(axis=(1, 3))


def _block_normalize(hist: np.ndarray, clip: float, eps: float = 1e-8) -> np.ndarray:
    # each cell is normalized by the four 2x2 blocks that contain it, results averaged
    energy = np.sum(hist**2, axis=2)
    e = np.pad(energy, 1, mode="edge")
    block = e[:-1, :-1] + e[1:, :-1] + e[:-1, 1:] + e[1:, 1:]  # (hc+1, wc+1)
    out = np.zeros_like(hist)
    for dy in (0, 1):
        for dx in (0, 1):
            b = block[dy:dy + hist.shape[0], dx:dx + hist.shape[1]]
            out += np.minimum(hist / np.sqrt(b + eps)[:, :, None], clip)
    return out / 4.0


def hog_cells(patch: np.ndarray, cell_size: int = 4, orientation_bins: int = 9, clip: float = 0.2) -> np.ndarray:
    votes = _orientation_votes(patch, orientation_bins)
    return _block_normalize(_cell_sum(votes, cell_size), clip)


def extract_features(patch: np.ndarray, cfg: FeatureConfig = FeatureConfig(), window: bool = True) -> FeatureTensor:
    patch = np.asarray(patch, dtype=float)
    h, w = patch.shape
    c = cfg.cell_size
    if h % c or w % c:
        raise IndivisibleDimensions(f"patch {patch.shape} is not divisible by cell_size {c}")
    hist = hog_cells(patch, c, cfg.orientation_bins, cfg.clip)
    intensity = _cell_sum(patch, c) / (c * c)
    intensity = intensity - patch.mean()
    data = np.concatenate([hist, intensity[:, :, None]], axis=2)
    if window:
        data = data * cosine_window(data.shape[:2])[:, :, None]
    return FeatureTensor(data=data, cell_size=c, window_applied=window)
