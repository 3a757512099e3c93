"""Verification against the initial target appearance, and local re-detection.

The default scorer is a Pearson correlation between feature vectors of the
first-frame target and a candidate region, mapped to ``[0, 2]`` so the
usual thresholds (pass at 1.0, accept a detection at 1.6) keep their
meaning. Any object with the :class:`Verifier` methods can replace it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Protocol

import numpy as np
from scipy import ndimage

from .features import DEFAULT_CELL_SIZE, cell_features
from .geometry import BoundingBox, Frame, center_distance, sample_patches

DEFAULT_SCALES = (0.95, 1.0, 1.05)
SMOOTHING_SIGMA = 1.0  # pixels at the canonical size


@dataclass(frozen=True)
class DetectionConfig:
    tau1: float = 1.0
    tau2: float = 1.6
    beta: float = 1.5
    beta_default: float = 1.5
    beta_max: float = 4.0
    beta_step: float = 0.5
    stride: int | None = None  # None: max(1, floor(min(w, h) / 8))
    candidate_scales: tuple[float, ...] = DEFAULT_SCALES
    refine: bool = True

    def __post_init__(self):
        if self.tau2 < self.tau1:
            raise ValueError("tau2 must be >= tau1")
        if self.beta_default < 1.0 or self.beta < 1.0:
            raise ValueError("beta must be >= 1")
        if self.beta_max < self.beta_default:
            raise ValueError("beta_max must be >= beta_default")
        if self.stride is not None and self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not self.candidate_scales or any(s <= 0 for s in self.candidate_scales):
            raise ValueError("candidate_scales must be non-empty and positive")


@dataclass(frozen=True)
class Candidate:
    box: BoundingBox
    score: float = 0.0


@dataclass(frozen=True, eq=False)
class VerifierTemplate:
    features: np.ndarray  # flattened appearance vector
    canonical_size: tuple[int, int]  # (width, height) pixels
    cell_size: int = DEFAULT_CELL_SIZE


def _appearance(patches: np.ndarray, cell_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Smooth and standardise each patch, then featurise.

    Returns ``(vectors, valid)`` where ``valid`` flags patches with nonzero
    variance. Standardising first makes the score invariant to positive
    affine changes of intensity.
    """
    patches = np.asarray(patches, dtype=np.float64)
    if SMOOTHING_SIGMA > 0:
        patches = ndimage.gaussian_filter(
            patches, sigma=(0, SMOOTHING_SIGMA, SMOOTHING_SIGMA), mode="nearest"
        )
    mean = patches.mean(axis=(1, 2), keepdims=True)
    std = patches.std(axis=(1, 2), keepdims=True)
    valid = std[:, 0, 0] > 1e-12
    z = (patches - mean) / np.where(std > 1e-12, std, 1.0)
    feats = cell_features(z, cell_size)
    return feats.reshape(len(patches), -1), valid


def build_template(
    frame: Frame, box: BoundingBox, canonical_size=(32, 32), cell_size: int = DEFAULT_CELL_SIZE
) -> VerifierTemplate:
    vecs, _ = _appearance(_crop_many(frame, [box], canonical_size), cell_size)
    return VerifierTemplate(features=vecs[0], canonical_size=tuple(canonical_size), cell_size=cell_size)


def _crop_many(frame: Frame, boxes, canonical_size) -> np.ndarray:
    centers = np.array([b.center for b in boxes], dtype=np.float64)
    sizes = np.array([(b.w, b.h) for b in boxes], dtype=np.float64)
    w, h = canonical_size
    return sample_patches(frame, centers, sizes, (h, w))


def _pearson_scores(template: VerifierTemplate, vecs: np.ndarray, valid: np.ndarray) -> np.ndarray:
    t = template.features - template.features.mean()
    c = vecs - vecs.mean(axis=1, keepdims=True)
    tn = np.linalg.norm(t)
    cn = np.linalg.norm(c, axis=1)
    ok = valid & (cn > 1e-12) & (tn > 1e-12)
    rho = np.zeros(len(vecs))
    rho[ok] = (c[ok] @ t) / (cn[ok] * tn)
    return 2.0 * np.clip(rho, 0.0, 1.0)


def score_boxes(template: VerifierTemplate, frame: Frame, boxes) -> np.ndarray:
    boxes = list(boxes)
    if not boxes:
        return np.zeros(0)
    vecs, valid = _appearance(_crop_many(frame, boxes, template.canonical_size), template.cell_size)
    return _pearson_scores(template, vecs, valid)


def score(template: VerifierTemplate, frame: Frame, box: BoundingBox) -> float:
    return float(score_boxes(template, frame, [box])[0])


def verify(template: VerifierTemplate, frame: Frame, box: BoundingBox, cfg: DetectionConfig) -> tuple[bool, float]:
    s = score(template, frame, box)
    return s >= cfg.tau1, s


def region_side(box: BoundingBox, beta: float) -> float:
    return beta * math.hypot(box.w, box.h)


def default_stride(box: BoundingBox) -> int:
    return max(1, int(math.floor(min(box.w, box.h) / 8.0)))


def generate_candidates(box: BoundingBox, frame: Frame, cfg: DetectionConfig) -> list[BoundingBox]:
    """Sliding-window boxes whose centers lie in the local search square.

    Centers form a lattice through the input box center, stepped by the
    stride, clipped to the square of side ``beta * hypot(w, h)``. Centers
    outside the frame are skipped (the input center is always kept).
    Order is row-major over centers, then by candidate scale.
    """
    stride = cfg.stride if cfg.stride is not None else default_stride(box)
    half = region_side(box, cfg.beta) / 2.0
    k = int(math.floor(half / stride + 1e-9))
    offsets = np.arange(-k, k + 1) * stride
    cx, cy = box.center
    out = []
    for dy in offsets:
        for dx in offsets:
            x, y = cx + dx, cy + dy
            if (dx or dy) and not (0.0 <= x <= frame.width and 0.0 <= y <= frame.height):
                continue
            for s in cfg.candidate_scales:
                out.append(BoundingBox.from_center(x, y, box.w * s, box.h * s))
    return out


def _best(cands, scores, box) -> Candidate:
    best = float(scores.max())
    tied = np.flatnonzero(scores == best)
    i = min(tied, key=lambda j: (center_distance(cands[j], box), j))
    return Candidate(cands[i], float(scores[i]))


def refine_candidates(coarse: BoundingBox, stride: int) -> list[BoundingBox]:
    """1-pixel lattice covering the cells between ``coarse`` and its lattice neighbours."""
    r = stride - 1
    steps = range(-r, r + 1)
    return [coarse.shifted(dx, dy) for dy in steps for dx in steps if dx or dy]


def detect(template: VerifierTemplate, frame: Frame, box: BoundingBox, cfg: DetectionConfig) -> Candidate:
    """Best-scoring candidate; ties prefer the one nearest ``box``, then generation order.

    With ``cfg.refine`` the coarse winner is re-searched at 1-pixel steps
    over the span of one stride in each direction.
    """
    cands = generate_candidates(box, frame, cfg)
    best = _best(cands, score_boxes(template, frame, cands), box)
    stride = cfg.stride if cfg.stride is not None else default_stride(box)
    if cfg.refine and stride > 1:
        fine = [best.box] + refine_candidates(best.box, stride)
        best = _best(fine, score_boxes(template, frame, fine), box)
    return best


def adapt_search(cfg: DetectionConfig, detection_score: float) -> tuple[DetectionConfig, bool]:
    """Accept a detection at ``tau2``; otherwise widen the search region.

    On acceptance ``beta`` returns to its default. The caller restores or
    shortens the verification interval based on the returned flag.
    """
    if detection_score >= cfg.tau2:
        return replace(cfg, beta=cfg.beta_default), True
    return replace(cfg, beta=min(cfg.beta + cfg.beta_step, cfg.beta_max)), False


class Verifier(Protocol):
    """Pluggable verification component.

    ``score`` rates a tracked box; ``detect`` searches the local region
    around it. Thresholds and search adaptation are applied by the
    verifying worker, not the verifier itself.
    """

    def initialize(self, frame: Frame, box: BoundingBox) -> None: ...

    def score(self, frame: Frame, box: BoundingBox) -> float: ...

    def detect(self, frame: Frame, box: BoundingBox, cfg: DetectionConfig) -> Candidate: ...


class CorrelationVerifier:
    """Default verifier comparing against the first-frame appearance only."""

    def __init__(self, canonical_size=(32, 32), cell_size: int = DEFAULT_CELL_SIZE):
        self.canonical_size = tuple(canonical_size)
        self.cell_size = cell_size
        self.template: VerifierTemplate | None = None

    def initialize(self, frame: Frame, box: BoundingBox) -> None:
        self.template = build_template(frame, box, self.canonical_size, self.cell_size)

    def score(self, frame: Frame, box: BoundingBox) -> float:
        return score(self.template, frame, box)

    def detect(self, frame: Frame, box: BoundingBox, cfg: DetectionConfig) -> Candidate:
        return detect(self.template, frame, box, cfg)
