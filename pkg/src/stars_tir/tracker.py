"""Correlation-filter tracker combining ASTF training, EPSR refinement and GESR preprocessing."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .astf import (
    AstfConfig, AstfState, FilterBank, SpatialRegParams, TemporalRegParams, admm_astf, ridge_filter,
)
from .boxes import BoundingBox, Frame
from .epsr import EpsrConfig, epsr_run
from .errors import InvalidConfig
from .features import FeatureConfig, extract_features, extract_patch
from .gesr import GesrConfig, gesr_reconstruct, locate_peak, response_spectrum
from .numerics import dft2, gaussian_label, idft2, signed_offsets

__all__ = ["BoundingBox", "TrackerConfig", "TrackerState", "TrackResult", "init", "track", "detect", "run_sequence"]


@dataclass(frozen=True)
class TrackerConfig:
    # few warm-started inner steps per frame; the split resumes on the next frame
    astf: AstfConfig = AstfConfig(inner_iters=5, inner_tol=1e-4)
    sp: SpatialRegParams = SpatialRegParams()
    tp: TemporalRegParams = TemporalRegParams()
    epsr: EpsrConfig = EpsrConfig()
    gesr: GesrConfig = GesrConfig()
    features: FeatureConfig = FeatureConfig()
    learning_rate: float = 0.02
    sr_trigger_px: int = 32
    scales: tuple = (0.985, 1.0, 1.015)
    scale_penalty: float = 0.99
    padding: float = 1.5
    label_sigma_factor: float = 0.1
    # EPSR runs on the filter rescaled to this largest singular value
    epsr_scale: float = 50.0
    use_astf: bool = True
    use_epsr: bool = True
    use_gesr: bool = True

    def __post_init__(self):
        if not 0 <= self.learning_rate <= 1:
            raise InvalidConfig("learning_rate must lie in [0, 1]")
        if len(self.scales) == 0 or min(self.scales) <= 0:
            raise InvalidConfig("scales must be nonempty and positive")
        if self.padding < 0 or self.label_sigma_factor <= 0 or self.epsr_scale <= 0:
            raise InvalidConfig("padding must be >= 0, label_sigma_factor and epsr_scale > 0")
        if not 0 < self.scale_penalty <= 1:
            raise InvalidConfig("scale_penalty must be in (0, 1]")
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))


@dataclass
class TrackerState:
    model: FilterBank
    astf_state: Optional[AstfState]
    bbox: BoundingBox
    frame_index: int = 0
    last_response_peak: float = 0.0
    label: Optional[np.ndarray] = None
    window: int = 64  # model window side; doubled when super-resolution is active
    use_sr: bool = False
    frame_shape: tuple = (0, 0)
    base_size: tuple = (1.0, 1.0)


@dataclass
class TrackResult:
    bbox: BoundingBox
    peak: float
    used_sr: bool
    solver_iters: int
    elapsed: float
    converged: bool = True
    astf_converged: bool = True


def _sample(frame: Frame, bbox: BoundingBox, cfg: TrackerConfig, window: int, use_sr: bool) -> np.ndarray:
    if use_sr:
        s = cfg.gesr.scale
        low = window // s
        patch = extract_patch(frame, bbox, cfg.padding, (low, low))
        patch = gesr_reconstruct(patch, cfg.gesr)
    else:
        patch = extract_patch(frame, bbox, cfg.padding, (window, window))
    return extract_features(patch, replace(cfg.features, window=window)).data


def _label(bbox: BoundingBox, cfg: TrackerConfig, window: int) -> np.ndarray:
    cell = cfg.features.cell_size
    n = window // cell
    # target size measured in model-window samples
    side = (1.0 + cfg.padding)
    target = np.sqrt((bbox.w * window / max(1, round(bbox.w * side))) * (bbox.h * window / max(1, round(bbox.h * side))))
    return gaussian_label((n, n), cfg.label_sigma_factor * target / cell)


def _refine(f: np.ndarray, cfg: TrackerConfig) -> tuple[np.ndarray, bool, int]:
    # EPSR shrinks at absolute thresholds, so it sees the filter at a fixed
    # scale; the residual tolerance is read relative to that scale
    top = np.linalg.svd(np.moveaxis(f, 2, 0), compute_uv=False).max()
    if top <= 0:
        return f, True, 0
    ecfg = replace(cfg.epsr, tol=cfg.epsr.tol * cfg.epsr_scale)
    res = epsr_run(f * (cfg.epsr_scale / top), ecfg, warn=False)
    return res.F * (top / cfg.epsr_scale), res.converged, res.iters


def _train(x, y, prev: Optional[AstfState], model: Optional[np.ndarray], cfg: TrackerConfig):
    """New filter for sample ``x``: ASTF (or the ridge baseline), then EPSR.

    ASTF runs a fixed warm-started budget per frame, so reaching
    ``max_admm_iters`` is the normal regime and is reported separately; the
    returned ``converged`` flag covers EPSR and the finiteness of the filter.
    """
    iters, astf_ok = 0, True
    state = None
    if cfg.use_astf:
        if prev is not None and model is not None:
            prev = replace(prev, f=replace(prev.f, weights=model, prev=None))
        state = admm_astf(x, y, prev, cfg.astf, cfg.tp, warn=False)
        f = state.f.weights
        astf_ok, iters = state.converged, state.iter
    else:
        f = ridge_filter(x, y, cfg.astf.gamma_ridge)
    converged = True
    if cfg.use_epsr:
        f, converged, n = _refine(f, cfg)
        iters += n
        if state is not None:
            state = replace(state, f=replace(state.f, weights=f))
    converged = converged and bool(np.all(np.isfinite(f)))
    return f, state, converged, iters, astf_ok


def init(frame, bbox0: BoundingBox, cfg: TrackerConfig = TrackerConfig()) -> TrackerState:
    frame = frame if isinstance(frame, Frame) else Frame(frame)
    H, W = frame.shape
    bbox = bbox0.clipped(W, H)
    use_sr = cfg.use_gesr and min(bbox.w, bbox.h) < cfg.sr_trigger_px
    window = cfg.features.window * (cfg.gesr.scale if use_sr else 1)
    x = _sample(frame, bbox, cfg, window, use_sr)
    y = _label(bbox, cfg, window)
    f, astf_state, _, _, _ = _train(x, y, None, None, cfg)
    return TrackerState(
        model=FilterBank(weights=f), astf_state=astf_state, bbox=bbox, frame_index=0,
        label=y, window=window, use_sr=use_sr, frame_shape=(H, W), base_size=(bbox.w, bbox.h),
    )


def _response(model: FilterBank, x: np.ndarray) -> np.ndarray:
    xf = dft2(x)
    spec = response_spectrum(
        [model.spectrum[:, :, d] for d in range(x.shape[2])],
        [xf[:, :, d] for d in range(x.shape[2])],
    )
    return idft2(spec)


def detect(state: TrackerState, frame: Frame, cfg: TrackerConfig) -> tuple[BoundingBox, float, float]:
    """Best (box, raw peak, scale) over the scale pyramid."""
    best = None
    cx, cy = state.bbox.center
    for s in cfg.scales:
        cand = BoundingBox.from_center(cx, cy, state.bbox.w * s, state.bbox.h * s)
        resp = _response(state.model, _sample(frame, cand, cfg, state.window, state.use_sr))
        r, c, peak = locate_peak(resp)
        score = peak * (1.0 if s == 1.0 else cfg.scale_penalty)
        if best is None or score > best[0]:
            best = (score, s, cand, r, c, peak, resp.shape)
    _, s, cand, r, c, peak, shape = best
    cell = cfg.features.cell_size
    dy = signed_offsets(shape[0])[r] * cell * round(cand.h * (1 + cfg.padding)) / state.window
    dx = signed_offsets(shape[1])[c] * cell * round(cand.w * (1 + cfg.padding)) / state.window
    return BoundingBox.from_center(cx + dx, cy + dy, cand.w, cand.h), peak, s


# box size stays within these factors of the initial size
_SIZE_LIMITS = (0.2, 5.0)


def _constrain(bbox: BoundingBox, state: TrackerState, W: int, H: int) -> BoundingBox:
    cx, cy = bbox.center
    cx = min(max(cx, 0.0), W - 1.0)
    cy = min(max(cy, 0.0), H - 1.0)
    w0, h0 = state.base_size
    lo, hi = _SIZE_LIMITS
    k = min(max(bbox.w / w0, lo), hi)
    return BoundingBox.from_center(cx, cy, w0 * k, h0 * k)


def track(state: TrackerState, frame, cfg: TrackerConfig = TrackerConfig()) -> tuple[TrackerState, TrackResult]:
    t0 = time.perf_counter()
    frame = frame if isinstance(frame, Frame) else Frame(frame)
    H, W = frame.shape
    bbox, peak, _ = detect(state, frame, cfg)
    bbox = _constrain(bbox, state, W, H)
    x = _sample(frame, bbox, cfg, state.window, state.use_sr)
    new, astf_state, converged, iters, astf_ok = _train(x, state.label, state.astf_state, state.model.weights, cfg)
    lr = cfg.learning_rate
    model = state.model if lr == 0 else FilterBank(weights=(1.0 - lr) * state.model.weights + lr * new)
    new_state = replace(
        state, model=model, astf_state=astf_state, bbox=bbox,
        frame_index=state.frame_index + 1, last_response_peak=peak,
    )
    return new_state, TrackResult(bbox, peak, state.use_sr, iters, time.perf_counter() - t0, converged, astf_ok)


def run_sequence(frames, bbox0: BoundingBox, cfg: TrackerConfig = TrackerConfig()) -> list:
    """Track a whole sequence; element 0 is the (clipped) initial box."""
    it = iter(frames)
    t0 = time.perf_counter()
    state = init(next(it), bbox0, cfg)
    out = [TrackResult(state.bbox, 1.0, state.use_sr, 0, time.perf_counter() - t0)]
    for frame in it:
        state, res = track(state, frame, cfg)
        out.append(res)
    return out
