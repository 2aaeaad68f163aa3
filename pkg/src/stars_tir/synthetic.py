"""Synthetic thermal-like sequences with analytic ground truth."""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .boxes import BoundingBox
from .gesr import blur


@dataclass
class SyntheticSequence:
    name: str
    frames: list
    boxes: list
    attributes: frozenset = frozenset()


def _render(shape, cy, cx, sigma, amplitude=0.7, background=0.15):
    yy, xx = np.mgrid[: shape[0], : shape[1]].astype(float)
    return background + amplitude * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sigma**2))


def _trajectory(rng, n_frames, size, speed, margin):
    pos = rng.uniform(margin, size - margin, 2)
    ang = rng.uniform(0, 2 * np.pi)
    vel = speed * np.array([np.sin(ang), np.cos(ang)])
    out = []
    for _ in range(n_frames):
        out.append(pos.copy())
        pos = pos + vel
        for k in range(2):
            # reflect off the margins
            if pos[k] < margin:
                pos[k] = 2 * margin - pos[k]
                vel[k] = -vel[k]
            elif pos[k] > size - margin:
                pos[k] = 2 * (size - margin) - pos[k]
                vel[k] = -vel[k]
    return out


def blob_sequence(
    seed: int,
    n_frames: int = 200,
    size: int = 64,
    sigma: float = 4.0,
    speed: float = 2.0,
    noise: float = 0.02,
) -> SyntheticSequence:
    """Gaussian blob bouncing inside a square canvas; the box is 4 sigma wide."""
    rng = np.random.default_rng(seed)
    side = 4.0 * sigma
    traj = _trajectory(rng, n_frames, size, speed, margin=side / 2.0)
    frames, boxes = [], []
    for cy, cx in traj:
        img = _render((size, size), cy, cx, sigma) + rng.normal(0.0, noise, (size, size))
        frames.append(np.clip(img, 0.0, 1.0))
        boxes.append(BoundingBox.from_center(cx, cy, side, side))
    return SyntheticSequence(f"blob_{seed}", frames, boxes)


def lowres_blob_sequence(
    seed: int,
    n_frames: int = 200,
    size: int = 64,
    target: float = 20.0,
    speed: float = 2.0,
    noise: float = 0.02,
    factor: int = 2,
) -> SyntheticSequence:
    """Blob rendered at ``factor`` x resolution, blurred (sigma 1) and downsampled.

    ``target`` is the box side at the output resolution (4 sigma of the blob).
    """
    rng = np.random.default_rng(seed)
    hr = size * factor
    sigma_hr = target * factor / 4.0
    traj = _trajectory(rng, n_frames, hr, speed * factor, margin=target * factor / 2.0)
    frames, boxes = [], []
    for cy, cx in traj:
        img = blur(_render((hr, hr), cy, cx, sigma_hr), 1.0)
        img = cv2.resize(img, (size, size), interpolation=cv2.INTER_AREA)
        frames.append(np.clip(img + rng.normal(0.0, noise, img.shape), 0.0, 1.0))
        boxes.append(BoundingBox.from_center(cx / factor, cy / factor, target, target))
    return SyntheticSequence(f"lowres_blob_{seed}", frames, boxes, frozenset({"low_resolution"}))


def sr_corpus(seed: int, n_images: int = 50, size: int = 64, factor: int = 2) -> list:
    """``(hr, lr)`` pairs: 1-3 random blobs, blurred (sigma 1) and downsampled by ``factor``."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_images):
        hr = np.full((size, size), 0.1)
        for _ in range(rng.integers(1, 4)):
            cy, cx = rng.uniform(0.2 * size, 0.8 * size, 2)
            hr += _render((size, size), cy, cx, rng.uniform(2.0, 6.0), rng.uniform(0.3, 0.8), 0.0)
        hr = np.clip(hr, 0.0, 1.0)
        lr = cv2.resize(blur(hr, 1.0), (size // factor, size // factor), interpolation=cv2.INTER_AREA)
        out.append((hr, lr))
    return out
