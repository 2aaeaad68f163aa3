"""One-pass evaluation: overlap / centre-error metrics, curves and report assembly."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .boxes import BoundingBox
from .errors import EmptyInput, SequenceReadError

log = logging.getLogger(__name__)

PRECISION_THRESHOLDS = np.arange(0, 51, dtype=float)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 51)
HEADLINE_PX = 20.0


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ax1, ay1 = a.x + a.w, a.y + a.h
    bx1, by1 = b.x + b.w, b.y + b.h
    inter = max(0.0, min(ax1, bx1) - max(a.x, b.x)) * max(0.0, min(ay1, by1) - max(a.y, b.y))
    # areas from the same corner coordinates, so that iou(a, a) is exactly 1
    union = (ax1 - a.x) * (ay1 - a.y) + (bx1 - b.x) * (by1 - b.y) - inter
    return float(min(1.0, inter / union)) if union > 0 else 0.0


def center_error(a: BoundingBox, b: BoundingBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return float(np.hypot(ax - bx, ay - by))


def _nonempty(values, what: str) -> np.ndarray:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput(f"{what} needs at least one value")
    return arr


def precision_curve(errors, thresholds=PRECISION_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with centre error <= t, for every threshold t."""
    e = _nonempty(errors, "precision_curve")
    t = np.asarray(thresholds, dtype=float)
    return (e[None, :] <= t[:, None]).mean(axis=1)


def success_curve(ious, thresholds=SUCCESS_THRESHOLDS) -> np.ndarray:
    """Fraction of frames with IoU > t; a perfect overlap (IoU == 1) counts at every t."""
    v = _nonempty(ious, "success_curve")
    t = np.asarray(thresholds, dtype=float)
    hit = (v[None, :] > t[:, None]) | (v[None, :] >= 1.0)
    return hit.mean(axis=1)


def auc(curve) -> float:
    return float(np.mean(_nonempty(curve, "auc")))


def precision_at(curve, px: float = HEADLINE_PX, thresholds=PRECISION_THRESHOLDS) -> float:
    idx = np.flatnonzero(np.isclose(np.asarray(thresholds, dtype=float), px))
    if idx.size == 0:
        raise ValueError(f"threshold {px} is not on the curve grid")
    return float(np.asarray(curve)[idx[0]])


def mean_iou_precision(ious) -> float:
    """Mean IoU over frames."""
    return float(np.mean(_nonempty(ious, "mean_iou_precision")))


def normalized_precision(ious, gt_boxes: Sequence[BoundingBox], frame_shape) -> float:
    """Mean of IoU / (gt area / frame area), each ratio clamped to [0, 1]."""
    v = _nonempty(ious, "normalized_precision")
    if len(gt_boxes) != v.size:
        raise ValueError("one ground-truth box per IoU value is required")
    h, w = frame_shape
    frac = np.array([b.area for b in gt_boxes], dtype=float) / float(h * w)
    return float(np.mean(np.clip(v / frac, 0.0, 1.0)))


@dataclass
class SequenceAnnotation:
    name: str
    frame_paths: list
    gt_boxes: list  # BoundingBox or None for invalid frames
    attributes: frozenset = frozenset()
    frames: Optional[list] = None  # in-memory frames, used instead of frame_paths when given

    def __post_init__(self):
        n = len(self.frames) if self.frames is not None else len(self.frame_paths)
        if len(self.gt_boxes) != n:
            raise SequenceReadError(f"{self.name}: {n} frames but {len(self.gt_boxes)} ground-truth rows")
        self.attributes = frozenset(self.attributes)

    def __len__(self) -> int:
        return len(self.gt_boxes)


@dataclass
class SequenceMetrics:
    name: str
    n_frames: int
    n_valid: int
    precision_curve: np.ndarray
    success_curve: np.ndarray
    precision20: float
    auc: float
    mean_iou_precision: float
    normalized_precision: float
    fps: float
    converged: bool
    attributes: frozenset = frozenset()

    def to_dict(self) -> dict:
        return {
            "name": self.name, "n_frames": self.n_frames, "n_valid": self.n_valid,
            "precision20": self.precision20, "auc": self.auc,
            "mean_iou_precision": self.mean_iou_precision, "normalized_precision": self.normalized_precision,
            "fps": self.fps, "converged": self.converged, "attributes": sorted(self.attributes),
            "precision_curve": self.precision_curve.tolist(), "success_curve": self.success_curve.tolist(),
        }


def score_sequence(
    name: str,
    pred: Sequence[BoundingBox],
    gt: Sequence[Optional[BoundingBox]],
    frame_shape,
    fps: float = 0.0,
    converged: bool = True,
    attributes=frozenset(),
) -> SequenceMetrics:
    """Metrics of one sequence; frames with invalid ground truth are skipped."""
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predictions for {len(gt)} frames")
    pairs = [(p, g) for p, g in zip(pred, gt) if g is not None]
    if not pairs:
        raise EmptyInput(f"{name}: no frame has valid ground truth")
    ious = [iou(p, g) for p, g in pairs]
    errs = [center_error(p, g) for p, g in pairs]
    pc = precision_curve(errs)
    sc = success_curve(ious)
    return SequenceMetrics(
        name=name, n_frames=len(gt), n_valid=len(pairs),
        precision_curve=pc, success_curve=sc,
        precision20=precision_at(pc), auc=auc(sc),
        mean_iou_precision=mean_iou_precision(ious),
        normalized_precision=normalized_precision(ious, [g for _, g in pairs], frame_shape),
        fps=fps, converged=converged, attributes=frozenset(attributes),
    )


def _aggregate(metrics: Sequence[SequenceMetrics]) -> dict:
    pc = np.mean([m.precision_curve for m in metrics], axis=0)
    sc = np.mean([m.success_curve for m in metrics], axis=0)
    frames = sum(m.n_frames for m in metrics)
    secs = sum(m.n_frames / m.fps for m in metrics if m.fps > 0)
    return {
        "precision_curve": pc, "success_curve": sc,
        "precision20": precision_at(pc), "auc": auc(sc),
        "mean_iou_precision": float(np.mean([m.mean_iou_precision for m in metrics])),
        "normalized_precision": float(np.mean([m.normalized_precision for m in metrics])),
        "fps": frames / secs if secs > 0 else 0.0,
        "n_sequences": len(metrics),
    }


@dataclass
class EvalReport:
    """Sequence-averaged curves and headline numbers, plus per-attribute rows."""

    sequences: list
    precision_curve: np.ndarray
    success_curve: np.ndarray
    precision20: float
    auc: float
    normalized_precision: float
    mean_iou_precision: float
    fps: float
    attribute_rows: dict = field(default_factory=dict)
    skipped: list = field(default_factory=list)
    label: str = "STARS"

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.sequences)

    def to_dict(self) -> dict:
        def clean(d):
            return {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in d.items()}

        return {
            "label": self.label,
            "precision20": self.precision20, "auc": self.auc,
            "normalized_precision": self.normalized_precision,
            "mean_iou_precision": self.mean_iou_precision, "fps": self.fps,
            "converged": self.converged,
            "precision_thresholds": PRECISION_THRESHOLDS.tolist(),
            "success_thresholds": SUCCESS_THRESHOLDS.tolist(),
            "precision_curve": self.precision_curve.tolist(),
            "success_curve": self.success_curve.tolist(),
            "attributes": {a: clean(r) for a, r in sorted(self.attribute_rows.items())},
            "sequences": [m.to_dict() for m in self.sequences],
            "skipped": list(self.skipped),
        }


def build_report(metrics: Iterable[SequenceMetrics], skipped=(), label: str = "STARS") -> EvalReport:
    """Assemble a report; the input order does not matter."""
    metrics = sorted(metrics, key=lambda m: m.name)
    if not metrics:
        raise EmptyInput("no sequence could be evaluated")
    agg = _aggregate(metrics)
    rows = {}
    for attr in sorted({a for m in metrics for a in m.attributes}):
        rows[attr] = _aggregate([m for m in metrics if attr in m.attributes])
    return EvalReport(
        sequences=metrics,
        precision_curve=agg["precision_curve"], success_curve=agg["success_curve"],
        precision20=agg["precision20"], auc=agg["auc"],
        normalized_precision=agg["normalized_precision"], mean_iou_precision=agg["mean_iou_precision"],
        fps=agg["fps"], attribute_rows=rows, skipped=sorted(skipped), label=label,
    )


# A tracker maps (frames, first box, config) to one predicted box per frame
# plus a convergence flag.
TrackerFn = Callable[[Sequence, BoundingBox, object], tuple]


def stars_tracker(frames, bbox0: BoundingBox, cfg) -> tuple[list, bool]:
    from .tracker import run_sequence

    results = run_sequence(frames, bbox0, cfg)
    return [r.bbox for r in results], all(r.converged for r in results)


def oracle_tracker(gt: Sequence[Optional[BoundingBox]]) -> TrackerFn:
    """Tracker that echoes the ground truth (holding the last valid box)."""

    def run(frames, bbox0, cfg):
        out, last = [], bbox0
        for g in gt:
            last = g if g is not None else last
            out.append(last)
        return out, True

    return run


def _frames(seq: SequenceAnnotation) -> list:
    if seq.frames is not None:
        return list(seq.frames)
    from .io import read_frame

    return [read_frame(p) for p in seq.frame_paths]


def run_ope(
    dataset: Sequence[SequenceAnnotation],
    cfg=None,
    tracker: Optional[Callable[[SequenceAnnotation], TrackerFn]] = None,
    label: str = "STARS",
    on_sequence: Optional[Callable[[SequenceAnnotation, list, SequenceMetrics], None]] = None,
) -> EvalReport:
    """Initialize on frame 0 of every sequence, track to the end, score.

    ``tracker`` builds the per-sequence tracker function; the default is the
    full tracker.  Sequences that fail to load are skipped and logged.
    """
    from .boxes import Frame
    from .tracker import TrackerConfig

    cfg = TrackerConfig() if cfg is None else cfg
    metrics, skipped = [], []
    for seq in dataset:
        try:
            frames = [f if isinstance(f, Frame) else Frame.from_raw(f) for f in _frames(seq)]
            if not frames or seq.gt_boxes[0] is None:
                raise SequenceReadError(f"{seq.name}: first frame has no valid ground truth")
            fn = stars_tracker if tracker is None else tracker(seq)
            t0 = time.perf_counter()
            pred, ok = fn(frames, seq.gt_boxes[0], cfg)
            elapsed = time.perf_counter() - t0
        except SequenceReadError as exc:
            log.warning("skipping sequence %s: %s", seq.name, exc)
            skipped.append(seq.name)
            continue
        m = score_sequence(
            seq.name, pred, seq.gt_boxes, frames[0].shape,
            fps=len(frames) / elapsed if elapsed > 0 else 0.0,
            converged=ok, attributes=seq.attributes,
        )
        if on_sequence is not None:
            on_sequence(seq, pred, m)
        metrics.append(m)
    return build_report(metrics, skipped, label)


def table_rows(reports: Sequence[EvalReport]) -> list[dict]:
    return [
        {"method": r.label, "precision": 100.0 * r.precision20, "success": 100.0 * r.auc, "fps": r.fps}
        for r in reports
    ]


def format_table(reports: Sequence[EvalReport]) -> str:
    """Aligned plain-text table: method, precision (%), success (%), FPS."""
    rows = table_rows(reports)
    width = max([len("Method")] + [len(r["method"]) for r in rows])
    lines = [f"{'Method':<{width}}  {'Precision':>9}  {'Success':>7}  {'FPS':>7}"]
    for r in rows:
        lines.append(f"{r['method']:<{width}}  {r['precision']:>9.1f}  {r['success']:>7.1f}  {r['fps']:>7.1f}")
    return "\n".join(lines) + "\n"
