"""Sequence ingestion and one-pass evaluation (OPE).

Sequences follow the OTB layout::

    <seq>/img/0001.jpg ...        zero-padded, numbered frames
    <seq>/groundtruth_rect.txt    one ``x,y,w,h`` line per frame, 1-based

Ground truth is converted to 0-based pixel coordinates on load.
"""

from __future__ import annotations

import csv
import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import BoundingBox, Frame, center_distance, iou

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".pgm", ".tif", ".tiff")
PRECISION_THRESHOLDS = np.arange(51, dtype=np.float64)
SUCCESS_THRESHOLDS = np.linspace(0.0, 1.0, 21)
DPR_THRESHOLD = 20.0
OSR_THRESHOLD = 0.5


class SequenceError(ValueError):
    pass


@dataclass
class Sequence:
    name: str
    ground_truth: list[BoundingBox]
    frame_paths: list[Path] = field(default_factory=list)
    frames: list[Frame] | None = None

    def __post_init__(self):
        n = len(self.frames) if self.frames is not None else len(self.frame_paths)
        if n != len(self.ground_truth):
            raise SequenceError(
                f"{self.name}: {n} frames but {len(self.ground_truth)} ground-truth boxes"
            )
        if n == 0:
            raise SequenceError(f"{self.name}: sequence is empty")

    def __len__(self) -> int:
        return len(self.ground_truth)

    def load_frames(self) -> list[Frame]:
        if self.frames is None:
            from PIL import Image

            frames = []
            for i, path in enumerate(self.frame_paths):
                with Image.open(path) as im:
                    frames.append(Frame.from_array(i, np.asarray(im)))
            self.frames = frames
        return self.frames


def _frame_number(path: Path) -> int:
    m = re.search(r"(\d+)(?!.*\d)", path.stem)
    if m is None:
        raise SequenceError(f"image file {path} has no frame number")
    return int(m.group(1))


def parse_groundtruth(path: Path) -> list[BoundingBox]:
    boxes = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = [p for p in re.split(r"[,\t ]+", line) if p]
            if len(parts) != 4:
                raise SequenceError(f"{path}:{lineno}: expected 4 values, got {len(parts)}: {line!r}")
            try:
                x, y, w, h = (float(p) for p in parts)
                box = BoundingBox(x - 1.0, y - 1.0, w, h)
            except ValueError as exc:
                raise SequenceError(f"{path}:{lineno}: malformed box {line!r} ({exc})") from None
            boxes.append(box)
    return boxes


def load_sequence(path) -> Sequence:
    root = Path(path)
    img_dir = root / "img"
    gt_path = root / "groundtruth_rect.txt"
    if not img_dir.is_dir():
        raise SequenceError(f"missing image directory: {img_dir}")
    if not gt_path.is_file():
        raise SequenceError(f"missing ground-truth file: {gt_path}")
    images = [p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES]
    if not images:
        raise SequenceError(f"no images in {img_dir}")
    images.sort(key=_frame_number)
    boxes = parse_groundtruth(gt_path)
    if len(boxes) != len(images):
        raise SequenceError(
            f"{root.name}: {len(images)} images but {len(boxes)} ground-truth lines in {gt_path}"
        )
    return Sequence(name=root.name, ground_truth=boxes, frame_paths=images)


def write_sequence(seq: Sequence, path) -> Path:
    """Write a sequence in OTB layout (PNG frames, 1-based ground truth)."""
    from PIL import Image

    root = Path(path)
    img_dir = root / "img"
    img_dir.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.load_frames()):
        data = np.round(np.asarray(frame.pixels, dtype=np.float64) * 255.0).astype(np.uint8)
        Image.fromarray(data).save(img_dir / f"{i + 1:04d}.png")
    with open(root / "groundtruth_rect.txt", "w") as fh:
        for b in seq.ground_truth:
            fh.write(f"{b.x + 1:.10g},{b.y + 1:.10g},{b.w:.10g},{b.h:.10g}\n")
    return root


# -- metrics ---------------------------------------------------------------


def _check_lengths(pred, gt):
    if len(pred) != len(gt):
        raise ValueError(f"{len(pred)} predictions vs {len(gt)} ground-truth boxes")


def center_errors(pred, gt) -> np.ndarray:
    _check_lengths(pred, gt)
    return np.array([center_distance(p, g) for p, g in zip(pred, gt)], dtype=np.float64)


def overlaps(pred, gt) -> np.ndarray:
    _check_lengths(pred, gt)
    return np.array([iou(p, g) for p, g in zip(pred, gt)], dtype=np.float64)


def precision_curve(pred, gt) -> np.ndarray:
    """Fraction of frames with center error ``<= t`` for ``t = 0..50`` px."""
    err = center_errors(pred, gt)
    return (err[None, :] <= PRECISION_THRESHOLDS[:, None]).mean(axis=1)


def success_curve(pred, gt) -> tuple[np.ndarray, float]:
    """Fraction of frames with IoU ``> t`` on 21 thresholds, and its mean (AUC)."""
    ov = overlaps(pred, gt)
    curve = (ov[None, :] > SUCCESS_THRESHOLDS[:, None]).mean(axis=1)
    return curve, float(curve.mean())


@dataclass
class EvaluationReport:
    name: str
    boxes: list[BoundingBox]
    ground_truth: list[BoundingBox]
    dpr: float
    osr: float
    auc: float
    precision: np.ndarray
    success: np.ndarray
    fps: float
    elapsed: float
    events: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def center_errors(self) -> np.ndarray:
        return center_errors(self.boxes, self.ground_truth)

    @property
    def overlaps(self) -> np.ndarray:
        return overlaps(self.boxes, self.ground_truth)

    def event_summary(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for ev in self.events:
            counts[ev.kind] = counts.get(ev.kind, 0) + 1
        return dict(sorted(counts.items()))

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "sequence": self.name,
            "frames": len(self.boxes),
            "dpr_at_20px": self.dpr,
            "osr_at_0.5": self.osr,
            "success_auc": self.auc,
            "conventions": {
                "dpr": "center error <= 20 px",
                "osr": "iou >= 0.5",
                "precision_curve": "center error <= t, t = 0..50 px",
                "success_curve": "iou > t, t = 0, 0.05, ..., 1",
            },
            "precision_curve": [float(v) for v in self.precision],
            "success_curve": [float(v) for v in self.success],
            "events": self.event_summary(),
            "config": self.config,
        }
        if include_timing:
            doc["fps"] = self.fps
            doc["elapsed_s"] = self.elapsed
        return doc

    def write(self, out_dir, include_timing: bool = True) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "report": out / f"{self.name}_report.json",
            "csv": out / f"{self.name}_frames.csv",
            "events": out / f"{self.name}_events.log",
        }
        with open(paths["report"], "w") as fh:
            json.dump(self.to_dict(include_timing), fh, indent=2, sort_keys=True)
            fh.write("\n")
        errs, ious = self.center_errors, self.overlaps
        with open(paths["csv"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frame", "x", "y", "w", "h", "center_err", "iou"])
            for i, (b, e, o) in enumerate(zip(self.boxes, errs, ious)):
                w.writerow([i, f"{b.x:.6f}", f"{b.y:.6f}", f"{b.w:.6f}", f"{b.h:.6f}", f"{e:.6f}", f"{o:.6f}"])
        with open(paths["events"], "w") as fh:
            for ev in self.events:
                fh.write(ev.format() + "\n")
        return paths


def evaluate(name, boxes, ground_truth, *, fps=0.0, elapsed=0.0, events=(), config=None) -> EvaluationReport:
    prec = precision_curve(boxes, ground_truth)
    succ, auc = success_curve(boxes, ground_truth)
    osr = float((overlaps(boxes, ground_truth) >= OSR_THRESHOLD).mean())
    return EvaluationReport(
        name=name,
        boxes=list(boxes),
        ground_truth=list(ground_truth),
        dpr=float(prec[int(DPR_THRESHOLD)]),
        osr=osr,
        auc=auc,
        precision=prec,
        success=succ,
        fps=fps,
        elapsed=elapsed,
        events=list(events),
        config=dict(config or {}),
    )


def run_ope(sequence: Sequence, config=None, *, tracker=None, verifier=None) -> EvaluationReport:
    """Initialise once from frame 0's ground truth and run to the end.

    ``config`` is a :class:`ptav.config.RunConfig`; frames are loaded before
    the clock starts so fps reflects the engine alone.
    """
    from .config import RunConfig, build_engine

    config = config or RunConfig()
    frames = sequence.load_frames()
    engine = build_engine(config, tracker=tracker, verifier=verifier)
    t0 = time.perf_counter()
    result = engine.run(frames, sequence.ground_truth[0])
    elapsed = time.perf_counter() - t0
    fps = len(frames) / elapsed if elapsed > 0 else float("inf")
    return evaluate(
        sequence.name,
        result.boxes,
        sequence.ground_truth,
        fps=fps,
        elapsed=elapsed,
        events=result.events,
        config=config.to_dict(),
    )
