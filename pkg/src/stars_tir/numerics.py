"""Shared numerical kernels.

Spectral transforms use the unnormalized forward / ``1/(HW)`` inverse
convention of :func:`numpy.fft.fft2`.  Difference operators keep the input
shape: missing boundary differences are set to zero so that every operator
stays linear and annihilates constants.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionTooSmall, NegativeThreshold, NonPositiveSigma, UnsupportedOrder


def dft2(f: np.ndarray) -> np.ndarray:
    """Forward 2-D DFT over the two leading axes."""
    return np.fft.fft2(f, axes=(0, 1))


def idft2(s: np.ndarray, real: bool = True) -> np.ndarray:
    """Inverse of :func:`dft2`; returns the real part unless ``real=False``."""
    out = np.fft.ifft2(s, axes=(0, 1))
    return out.real if real else out


def _check_min_size(f: np.ndarray, n: int) -> None:
    if f.ndim < 2 or f.shape[0] < n or f.shape[1] < n:
        raise DimensionTooSmall(f"need at least {n}x{n} samples, got shape {f.shape}")


def _diff(f: np.ndarray, axis: int) -> np.ndarray:
    # forward difference with the last row/column along `axis` set to zero
    out = np.zeros_like(f, dtype=float)
    if axis == 0:
        out[:-1] = f[1:] - f[:-1]
    else:
        out[:, :-1] = f[:, 1:] - f[:, :-1]
    return out


def _diff_adjoint(g: np.ndarray, axis: int) -> np.ndarray:
    """Adjoint of :func:`_diff` (a negative backward difference)."""
    out = np.zeros_like(g, dtype=float)
    if axis == 0:
        out[1:] += g[:-1]
        out[:-1] -= g[:-1]
    else:
        out[:, 1:] += g[:, :-1]
        out[:, :-1] -= g[:, :-1]
    return out


def grad_forward(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along rows (``gx``) and columns (``gy``).

    Works on 2-D fields and on H x W x D stacks (channels are independent).
    """
    _check_min_size(f, 2)
    return _diff(f, 0), _diff(f, 1)


def grad_adjoint(gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`grad_forward`, so that <grad f, g> == <f, grad_adjoint g>."""
    return _diff_adjoint(gx, 0) + _diff_adjoint(gy, 1)


def laplacian(f: np.ndarray) -> np.ndarray:
    """5-point Laplacian on the interior, zero on the one-sample border."""
    _check_min_size(f, 3)
    out = np.zeros_like(f, dtype=float)
    out[1:-1, 1:-1] = (
        f[:-2, 1:-1] + f[2:, 1:-1] + f[1:-1, :-2] + f[1:-1, 2:] - 4.0 * f[1:-1, 1:-1]
    )
    return out


def grad_n(f: np.ndarray, order: int) -> np.ndarray:
    """Order-3 or order-4 difference: ``D_x^n f + D_y^n f`` from composed forward differences."""
    if order not in (3, 4):
        raise UnsupportedOrder(f"order must be 3 or 4, got {order}")
    _check_min_size(f, order + 1)
    gx = f
    gy = f
    for _ in range(order):
        gx = _diff(gx, 0)
        gy = _diff(gy, 1)
    return gx + gy


def soft_threshold(v, lam: float) -> np.ndarray:
    """Proximal map of ``lam * |.|``: ``sign(v) * max(|v| - lam, 0)``."""
    if lam < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {lam}")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def hard_threshold(v, tau: float) -> np.ndarray:
    """Keep entries with ``|v| > tau``, zero the rest."""
    if tau < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {tau}")
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) > tau, v, 0.0)


def _as_tensor3(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return t[:, :, None] if t.ndim == 2 else t


def tsvt(t: np.ndarray, tau: float) -> np.ndarray:
    """Singular-value thresholding applied to every frontal slice ``t[:, :, d]``.

    Computed as ``A V diag(max(1 - tau/s, 0)) V'`` from the eigenpairs of the
    smaller Gram matrix; the map is a continuous function of ``A'A``, so
    repeated singular values need no special care.
    """
    if tau < 0:
        raise NegativeThreshold(f"threshold must be >= 0, got {tau}")
    t = np.asarray(t, dtype=float)
    a = np.moveaxis(_as_tensor3(t), 2, 0)
    wide = a.shape[1] < a.shape[2]
    if wide:
        a = a.transpose(0, 2, 1)
    lam, v = np.linalg.eigh(a.transpose(0, 2, 1) @ a)
    s = np.sqrt(np.maximum(lam, 0.0))
    gain = np.where(s > tau, 1.0 - tau / np.where(s > 0, s, 1.0), 0.0)
    out = (a @ v) @ (gain[:, :, None] * v.transpose(0, 2, 1))
    if wide:
        out = out.transpose(0, 2, 1)
    return np.moveaxis(out, 0, 2).reshape(t.shape)


def nuclear_norm_slices(t: np.ndarray) -> float:
    """Sum over frontal slices of the slice nuclear norms."""
    t3 = _as_tensor3(t)
    s = np.linalg.svd(np.moveaxis(t3, 2, 0), compute_uv=False)
    return float(s.sum())


def signed_offsets(n: int) -> np.ndarray:
    """Circular offsets ``0, 1, ..., -2, -1`` for an axis of length ``n``."""
    idx = np.arange(n)
    return np.where(idx <= n // 2, idx, idx - n)


def gaussian_label(shape: tuple[int, int], sigma: float) -> np.ndarray:
    """Gaussian centred on the zero-shift bin (0, 0), wrapping circularly."""
    if sigma <= 0:
        raise NonPositiveSigma(f"sigma must be > 0, got {sigma}")
    h, w = shape
    dy = signed_offsets(h)[:, None].astype(float)
    dx = signed_offsets(w)[None, :].astype(float)
    return np.exp(-(dy**2 + dx**2) / (2.0 * sigma**2))


def cosine_window(shape: tuple[int, int]) -> np.ndarray:
    h, w = shape
    if h < 2 or w < 2:
        raise DimensionTooSmall(f"cosine window needs at least 2x2, got {shape}")
    return np.outer(np.hanning(h), np.hanning(w))
