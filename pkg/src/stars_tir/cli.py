"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 solver non-convergence (results are still written).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

import cv2
import numpy as np

from . import io as sio
from .config import SECTIONS, load_config
from .errors import EmptyInput, InvalidConfig, SequenceReadError, StarsError, TypeMismatch, UnknownKey, WriteError
from .evaluation import format_table, run_ope, table_rows
from .gesr import gesr_reconstruct
from .tracker import TrackerConfig, run_sequence

log = logging.getLogger("stars_tir")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3

# ablation rows: label -> component flags
ABLATION_ROWS = (
    ("Baseline", dict(use_astf=False, use_epsr=False, use_gesr=False)),
    ("KCF-ASTF", dict(use_astf=True, use_epsr=False, use_gesr=False)),
    ("KCF-EPSR", dict(use_astf=False, use_epsr=True, use_gesr=False)),
    ("KCF-GESR", dict(use_astf=False, use_epsr=False, use_gesr=True)),
    ("STARS", dict(use_astf=True, use_epsr=True, use_gesr=True)),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_values(spec: str) -> list[Decimal]:
    """``start:stop:step`` (inclusive) or a comma list, as exact decimals."""
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise UsageError(f"range must be start:stop:step, got {spec!r}")
            start, stop, step = (Decimal(p) for p in parts)
            if step <= 0:
                raise UsageError("range step must be positive")
            out, v = [], start
            while v <= stop:
                out.append(v)
                v += step
            return out
        return [Decimal(p) for p in spec.split(",") if p.strip()]
    except InvalidOperation:
        raise UsageError(f"cannot parse values {spec!r}") from None


def with_param(cfg: TrackerConfig, dotted: str, value) -> TrackerConfig:
    """Copy of ``cfg`` with ``section.key`` set (sections as in the config file)."""
    section, _, key = dotted.partition(".")
    if section not in SECTIONS or not key:
        raise UsageError(f"parameter must be section.key with a section from {sorted(SECTIONS)}, got {dotted!r}")
    attr = SECTIONS[section]
    target = cfg if attr is None else getattr(cfg, attr)
    if not hasattr(target, key):
        raise UsageError(f"unknown parameter {dotted!r}")
    cur = getattr(target, key)
    value = type(cur)(value) if isinstance(cur, (int, float)) and not isinstance(cur, bool) else value
    new = replace(target, **{key: value})
    return new if attr is None else replace(cfg, **{attr: new})


def _dataset(args):
    globs = args.glob or ["*"]
    seqs, skipped = sio.load_dataset(args.dataset, globs, getattr(args, "attr", None))
    if not seqs:
        raise SequenceReadError(f"no readable sequence under {args.dataset}")
    return seqs, skipped, globs


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    seq = sio.load_sequence(args.sequence)
    out = Path(args.out)
    frames = [sio.read_frame(p) for p in seq.frame_paths]
    if seq.gt_boxes[0] is None:
        raise SequenceReadError(f"{seq.name}: first frame has no valid ground truth")
    results = run_sequence(frames, seq.gt_boxes[0], cfg)
    sio.write_boxes(results, out / "boxes.txt")
    if args.overlay:
        sio.render_overlays(replace(seq, frames=frames), results, out / "overlays")
    sio.RunManifest.create("track", args.sequence, [seq.name], args.config, out, cfg).write(out)
    ok = all(r.converged for r in results)
    if not ok:
        log.warning("solver did not converge on every frame; results written and flagged")
    return EXIT_OK if ok else EXIT_SOLVER


def _write_boxes_hook(out: Path, overlay: bool = False):
    def hook(seq, pred, metrics):
        d = out / seq.name
        sio.write_boxes(pred, d / "boxes.txt")
        if overlay:
            sio.render_overlays(seq, pred, d / "overlays")

    return hook


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    seqs, skipped, globs = _dataset(args)
    out = Path(args.out)
    report = run_ope(seqs, cfg, on_sequence=_write_boxes_hook(out, args.overlay))
    report.skipped = sorted(set(report.skipped) | set(skipped))
    sio.write_report(report, out)
    sio.emit_curves(report, out)
    sio.RunManifest.create("eval", args.dataset, globs, args.config, out, cfg).write(out)
    print(format_table([report]), end="")
    return EXIT_OK if report.converged else EXIT_SOLVER


def cmd_sr(args) -> int:
    cfg = load_config(args.config)
    if args.scale is not None:
        if args.scale < 2:
            raise UsageError("--scale must be an integer >= 2")
        cfg = replace(cfg, gesr=replace(cfg.gesr, scale=args.scale))
    raw = cv2.imread(str(args.input), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise SequenceReadError(f"cannot read image {args.input}")
    frame = sio.Frame.from_raw(raw)
    hr = gesr_reconstruct(frame.pixels, cfg.gesr)
    if args.side_by_side:
        s = cfg.gesr.scale
        before = cv2.resize(frame.pixels, (frame.shape[1] * s, frame.shape[0] * s), interpolation=cv2.INTER_NEAREST)
        hr = np.hstack([before, hr])
    depth = 16 if frame.bit_depth_origin == 16 else 8
    img = np.round(hr * (65535.0 if depth == 16 else 255.0)).astype(np.uint16 if depth == 16 else np.uint8)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(args.out), img):
        raise WriteError(f"cannot write {args.out}")
    return EXIT_OK


def _table_outputs(out: Path, reports, name: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    text = format_table(reports)
    (out / f"{name}.txt").write_text(text)
    rows = table_rows(reports)
    (out / f"{name}.json").write_text(json.dumps(rows, indent=2))
    with (out / f"{name}.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["method", "precision", "success", "fps"])
        w.writeheader()
        w.writerows(rows)
    print(text, end="")


def cmd_ablate(args) -> int:
    base = load_config(args.config)
    seqs, skipped, globs = _dataset(args)
    out = Path(args.out)
    reports = []
    for label, flags in ABLATION_ROWS:
        r = run_ope(seqs, replace(base, **flags), label=label)
        sio.write_report(r, out / label, name="report")
        reports.append(r)
    _table_outputs(out, reports, "ablation")
    sio.RunManifest.create("ablate", args.dataset, globs, args.config, out, base).write(out)
    return EXIT_OK if all(r.converged for r in reports) else EXIT_SOLVER


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    values = parse_values(args.values)
    if not values:
        raise UsageError("no values to sweep")
    cfgs = [with_param(base, args.param, float(v)) for v in values]
    seqs, skipped, globs = _dataset(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, ok = [], True
    for v, cfg in zip(values, cfgs):
        r = run_ope(seqs, cfg, label=f"{args.param}={v}")
        ok = ok and r.converged
        rows.append((str(v), 100.0 * r.precision20, 100.0 * r.auc))
    path = out / "sweep.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([args.param, "precision", "success"])
        for v, p, s in rows:
            w.writerow([v, f"{p:.2f}", f"{s:.2f}"])
    print(path.read_text(), end="")
    sio.RunManifest.create("sweep", args.dataset, globs, args.config, out, base).write(out)
    return EXIT_OK if ok else EXIT_SOLVER


def cmd_synth(args) -> int:
    from .synthetic import blob_sequence, lowres_blob_sequence

    out = Path(args.out)
    for k in range(args.count):
        seed = args.seed + k
        if args.lowres:
            seq = lowres_blob_sequence(seed, n_frames=args.frames)
        else:
            seq = blob_sequence(seed, n_frames=args.frames)
        sio.write_sequence(seq, out / seq.name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stars-tir", description="Thermal-infrared correlation-filter tracking toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("track", help="track one sequence")
    t.add_argument("--sequence", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True)
    t.add_argument("--overlay", action="store_true")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="one-pass evaluation over a dataset")
    e.add_argument("--dataset", required=True)
    e.add_argument("--config")
    e.add_argument("--out", required=True)
    e.add_argument("--attr", help="only sequences carrying this attribute")
    e.add_argument("--glob", action="append", help="sequence-name pattern (repeatable)")
    e.add_argument("--overlay", action="store_true")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sr", help="super-resolve one image")
    s.add_argument("--input", required=True)
    s.add_argument("--scale", type=int)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--side-by-side", action="store_true")
    s.set_defaults(func=cmd_sr)

    a = sub.add_parser("ablate", help="component ablation table")
    a.add_argument("--dataset", required=True)
    a.add_argument("--config")
    a.add_argument("--out", required=True)
    a.add_argument("--glob", action="append")
    a.set_defaults(func=cmd_ablate)

    w = sub.add_parser("sweep", help="precision/success versus one parameter")
    w.add_argument("--param", required=True, help="section.key, e.g. gesr.m")
    w.add_argument("--values", required=True, help="start:stop:step or a comma list")
    w.add_argument("--dataset", required=True)
    w.add_argument("--config")
    w.add_argument("--out", default=".")
    w.add_argument("--glob", action="append")
    w.set_defaults(func=cmd_sweep)

    y = sub.add_parser("synth", help="write synthetic blob sequences")
    y.add_argument("--out", required=True)
    y.add_argument("--count", type=int, default=1)
    y.add_argument("--frames", type=int, default=200)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--lowres", action="store_true")
    y.set_defaults(func=cmd_synth)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, UnknownKey, TypeMismatch, InvalidConfig) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SequenceReadError, EmptyInput, WriteError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except StarsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
