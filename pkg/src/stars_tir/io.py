"""Dataset ingestion and result / report persistence."""
from __future__ import annotations

import csv
import datetime as _dt
import fnmatch
import json
import logging
import re
from dataclasses import asdict, dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np

from .boxes import BoundingBox, Frame
from .errors import FrameCountMismatch, MissingGroundTruth, SequenceReadError, UnparsableLine, WriteError
from .evaluation import (
    PRECISION_THRESHOLDS, SUCCESS_THRESHOLDS, EvalReport, SequenceAnnotation, format_table,
)

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".pgm", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"}
GT_NAME = "groundtruth_rect.txt"
_SPLIT = re.compile(r"[,\t ]+")


def read_frame(path) -> Frame:
    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise SequenceReadError(f"cannot read image {path}")
    return Frame.from_raw(img)


def parse_box_line(line: str, path="<string>", lineno: int = 0) -> Optional[BoundingBox]:
    """One ``x,y,w,h`` row at the 1-based convention; ``None`` for NaN rows."""
    parts = [p for p in _SPLIT.split(line.strip()) if p]
    try:
        vals = [Decimal(p) for p in parts]
    except InvalidOperation:
        raise UnparsableLine(path, lineno, line.rstrip("\n")) from None
    if len(vals) != 4:
        raise UnparsableLine(path, lineno, line.rstrip("\n"))
    if any(v.is_nan() for v in vals):
        return None
    if not all(v.is_finite() for v in vals):
        raise UnparsableLine(path, lineno, line.rstrip("\n"))
    x, y, w, h = vals
    if w <= 0 or h <= 0:
        # zero-size rows mark absent targets in several toolkits
        return None
    # the origin shift is done in decimal so that it inverts format_box exactly
    return BoundingBox(float(x - 1), float(y - 1), float(w), float(h))


def read_boxes(path) -> list:
    path = Path(path)
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        out.append(parse_box_line(line, path, lineno))
    return out


def format_box(b: Optional[BoundingBox]) -> str:
    if b is None:
        return "NaN,NaN,NaN,NaN"

    def shifted(v):
        return str(Decimal(repr(float(v))) + 1)

    return ",".join([shifted(b.x), shifted(b.y), repr(float(b.w)), repr(float(b.h))])


def write_boxes(boxes: Sequence, path) -> Path:
    """Write one 1-based ``x,y,w,h`` row per box (``TrackResult`` or ``BoundingBox``)."""
    path = Path(path)
    rows = [format_box(getattr(b, "bbox", b)) for b in boxes]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(rows) + "\n")
    except OSError as exc:
        raise WriteError(f"cannot write {path}: {exc}") from exc
    return path


def load_sequence(directory) -> SequenceAnnotation:
    d = Path(directory)
    gt_path = d / GT_NAME
    if not gt_path.is_file():
        raise MissingGroundTruth(f"{d}: no {GT_NAME}")
    img_dir = d / "img" if (d / "img").is_dir() else d
    frames = sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    boxes = read_boxes(gt_path)
    if len(frames) != len(boxes):
        raise FrameCountMismatch(f"{d}: {len(frames)} frames but {len(boxes)} ground-truth rows")
    attrs = frozenset()
    attr_path = d / "attributes.txt"
    if attr_path.is_file():
        attrs = frozenset(a.strip() for a in re.split(r"[,\n]", attr_path.read_text()) if a.strip())
    return SequenceAnnotation(name=d.name, frame_paths=frames, gt_boxes=boxes, attributes=attrs)


def load_dataset(root, patterns: Sequence[str] = ("*",), attribute: Optional[str] = None) -> tuple[list, list]:
    """Every sequence directory under ``root`` matching one of ``patterns``.

    Returns ``(sequences, skipped_names)``; unreadable sequences are logged and skipped.
    """
    root = Path(root)
    if not root.is_dir():
        raise SequenceReadError(f"dataset root {root} is not a directory")
    if (root / GT_NAME).is_file():
        candidates = [root]
    else:
        candidates = sorted(p for p in root.iterdir() if p.is_dir())
    seqs, skipped = [], []
    for p in candidates:
        if not any(fnmatch.fnmatch(p.name, pat) for pat in patterns):
            continue
        try:
            seq = load_sequence(p)
        except SequenceReadError as exc:
            log.warning("skipping %s: %s", p.name, exc)
            skipped.append(p.name)
            continue
        if attribute is None or attribute in seq.attributes:
            seqs.append(seq)
    return seqs, skipped


def write_sequence(seq, directory, bit_depth: int = 8) -> Path:
    """Store an in-memory sequence in the on-disk layout (``img/`` + ground truth)."""
    d = Path(directory)
    (d / "img").mkdir(parents=True, exist_ok=True)
    scale = 65535.0 if bit_depth == 16 else 255.0
    dtype = np.uint16 if bit_depth == 16 else np.uint8
    for k, f in enumerate(seq.frames):
        pix = f.pixels if isinstance(f, Frame) else np.asarray(f)
        img = np.round(np.clip(pix, 0.0, 1.0) * scale).astype(dtype)
        if not cv2.imwrite(str(d / "img" / f"{k + 1:04d}.png"), img):
            raise WriteError(f"cannot write frame {k} to {d}")
    write_boxes(seq.boxes if hasattr(seq, "boxes") else seq.gt_boxes, d / GT_NAME)
    attrs = getattr(seq, "attributes", frozenset())
    if attrs:
        (d / "attributes.txt").write_text("\n".join(sorted(attrs)) + "\n")
    return d


def _ensure_dir(d) -> Path:
    d = Path(d)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise WriteError(f"cannot create {d}: {exc}") from exc
    return d


def write_report(report: EvalReport, directory, name: str = "report") -> tuple[Path, Path]:
    d = _ensure_dir(directory)
    jpath, tpath = d / f"{name}.json", d / f"{name}.txt"
    try:
        jpath.write_text(json.dumps(report.to_dict(), indent=2))
        tpath.write_text(format_table([report]))
    except OSError as exc:
        raise WriteError(f"cannot write report to {d}: {exc}") from exc
    return jpath, tpath


def render_overlays(sequence: SequenceAnnotation, results: Sequence, directory) -> list:
    """One PNG per frame: prediction in red, ground truth in green, 2 px lines."""
    from .evaluation import _frames

    d = _ensure_dir(directory)
    frames = _frames(sequence)
    if len(results) != len(frames):
        raise ValueError(f"{len(results)} results for {len(frames)} frames")
    out = []
    for k, (frame, res) in enumerate(zip(frames, results)):
        pix = frame.pixels if isinstance(frame, Frame) else Frame.from_raw(frame).pixels
        img = cv2.cvtColor(np.round(np.clip(pix, 0, 1) * 255).astype(np.uint8), cv2.COLOR_GRAY2BGR)
        gt = sequence.gt_boxes[k]
        for box, color in ((gt, (0, 255, 0)), (getattr(res, "bbox", res), (0, 0, 255))):
            if box is None:
                continue
            p0 = (int(round(box.x)), int(round(box.y)))
            p1 = (int(round(box.x + box.w)) - 1, int(round(box.y + box.h)) - 1)
            cv2.rectangle(img, p0, p1, color, 2)
        path = d / f"{k + 1:04d}.png"
        if not cv2.imwrite(str(path), img):
            raise WriteError(f"cannot write {path}")
        out.append(path)
    return out


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_svg(path: Path, x, y, xlabel: str, ylabel: str, title: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(x, y, color="tab:red")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def emit_curves(report: EvalReport, directory) -> list:
    """precision.csv / success.csv (threshold, value) plus matching SVG plots."""
    d = _ensure_dir(directory)
    paths = []
    try:
        for name, thr, curve, xlabel, score in (
            ("precision", PRECISION_THRESHOLDS, report.precision_curve, "location error threshold (px)",
             f"P@20 = {report.precision20:.3f}"),
            ("success", SUCCESS_THRESHOLDS, report.success_curve, "overlap threshold",
             f"AUC = {report.auc:.3f}"),
        ):
            csv_path = d / f"{name}.csv"
            _write_csv(csv_path, ["threshold", name], [(repr(float(t)), repr(float(v))) for t, v in zip(thr, curve)])
            svg_path = d / f"{name}.svg"
            _write_svg(svg_path, thr, curve, xlabel, name, f"{report.label}: {score}")
            paths += [csv_path, svg_path]
    except OSError as exc:
        raise WriteError(f"cannot write curves to {d}: {exc}") from exc
    return paths


@dataclass
class RunManifest:
    command: str
    dataset_root: Optional[str]
    sequence_globs: list
    config_path: Optional[str]
    output_dir: str
    timestamp: str
    config_hash: str

    @classmethod
    def create(cls, command, dataset_root, globs, config_path, output_dir, cfg) -> "RunManifest":
        from .config import config_hash

        return cls(
            command=command,
            dataset_root=None if dataset_root is None else str(dataset_root),
            sequence_globs=list(globs),
            config_path=None if config_path is None else str(config_path),
            output_dir=str(output_dir),
            timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            config_hash=config_hash(cfg),
        )

    def write(self, directory) -> Path:
        d = _ensure_dir(directory)
        path = d / "manifest.json"
        try:
            path.write_text(json.dumps(asdict(self), indent=2))
        except OSError as exc:
            raise WriteError(f"cannot write {path}: {exc}") from exc
        return path
