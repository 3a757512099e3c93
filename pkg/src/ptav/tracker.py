"""Fast correlation-filter tracker with scale estimation.

The tracker is written as pure functions over an immutable
:class:`TrackerState`, so a snapshot of the tracker is simply a reference
to the state produced for that frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import filters
from .features import (
    DEFAULT_CELL_SIZE,
    PcaProjector,
    apply_hann_window,
    extract_features,
    pca_fit,
    pca_project,
)
from .filters import FilterModel, ScaleModel
from .geometry import BoundingBox, Frame, sample_patch


@dataclass(frozen=True)
class TrackerConfig:
    lam: float = filters.DEFAULT_LAMBDA
    eta: float = filters.DEFAULT_ETA
    padding: float = 2.0
    sigma_factor: float = filters.DEFAULT_SIGMA_FACTOR
    cell_size: int = DEFAULT_CELL_SIZE
    pca_dim: int = 5
    max_template_area: float = 64.0 * 64.0
    num_scales: int = 17
    scale_step: float = 1.02
    scale_sigma: float = 1.0
    scale_max_area: float = 512.0
    min_target_px: float = 4.0
    subcell: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.padding < 1.0:
            raise ValueError("padding must be >= 1")
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")
        if self.num_scales < 1 or self.num_scales % 2 == 0:
            raise ValueError("num_scales must be a positive odd count")
        if self.scale_step <= 1.0:
            raise ValueError("scale_step must be > 1")


@dataclass(frozen=True, eq=False)
class TrackerState:
    frame_index: int
    center: tuple[float, float]
    base_size: tuple[float, float]  # target (w, h) at scale 1
    template_shape: tuple[int, int]  # (rows, cols) pixels of the resampled search patch
    projector: PcaProjector
    filter: FilterModel
    scale: ScaleModel
    box: BoundingBox = field(init=False)

    def __post_init__(self):
        s = self.scale.current_scale
        w, h = self.base_size
        object.__setattr__(
            self, "box", BoundingBox.from_center(self.center[0], self.center[1], w * s, h * s)
        )


class CorrelationTracker:
    """Translation + scale correlation filter tracker.

    Any object exposing ``initialize``, ``step`` and ``reinitialize`` with
    these signatures can stand in as the tracking component of the engine.
    """

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()

    # -- helpers -----------------------------------------------------------

    def _patch_size(self, state_like, scale: float) -> tuple[float, float]:
        w, h = state_like.base_size
        p = self.config.padding
        return (w * p * scale, h * p * scale)

    def _raw_features(self, frame, center, patch_size, template_shape):
        patch = sample_patch(frame, center, patch_size, template_shape)
        return extract_features(patch, self.config.cell_size)

    def _features(self, frame, center, patch_size, template_shape, projector):
        fmap = self._raw_features(frame, center, patch_size, template_shape)
        return apply_hann_window(pca_project(projector, fmap))

    def _scale_bounds(self, frame: Frame, base_size) -> tuple[float, float]:
        w, h = base_size
        lo = self.config.min_target_px / min(w, h)
        hi = min(frame.width / w, frame.height / h)
        return lo, max(hi, lo)

    # -- public API --------------------------------------------------------

    def initialize(self, frame: Frame, box: BoundingBox) -> TrackerState:
        cfg = self.config
        base_size = (box.w, box.h)
        pw, ph = box.w * cfg.padding, box.h * cfg.padding
        shrink = min(1.0, float(np.sqrt(cfg.max_template_area / (pw * ph))))
        cs = cfg.cell_size
        rows = max(2 * cs, int(round(ph * shrink / cs)) * cs)
        cols = max(2 * cs, int(round(pw * shrink / cs)) * cs)
        template_shape = (rows, cols)

        raw = self._raw_features(frame, box.center, (pw, ph), template_shape)
        projector = pca_fit([raw], min(cfg.pca_dim, raw.d))
        return self._learn_fresh(frame, box, base_size, template_shape, projector)

    def _learn_fresh(self, frame, box, base_size, template_shape, projector) -> TrackerState:
        cfg = self.config
        scale = float(np.sqrt((box.w * box.h) / (base_size[0] * base_size[1])))
        patch_size = (base_size[0] * cfg.padding * scale, base_size[1] * cfg.padding * scale)
        feats = self._features(frame, box.center, patch_size, template_shape, projector)
        label = filters.make_label(feats.shape, cfg.sigma_factor)
        tfilter = filters.train_initial(feats, label, cfg.lam, cfg.eta, template_size=template_shape)
        lo, hi = self._scale_bounds(frame, base_size)
        smodel = filters.init_scale_model(
            frame,
            box.center,
            base_size,
            num_scales=cfg.num_scales,
            scale_step=cfg.scale_step,
            scale_sigma=cfg.scale_sigma,
            lam=cfg.lam,
            eta=cfg.eta,
            max_area=cfg.scale_max_area,
            cell_size=cfg.cell_size,
            projector=projector,
            current_scale=float(np.clip(scale, lo, hi)),
            min_scale=lo,
            max_scale=hi,
        )
        return TrackerState(
            frame_index=frame.index,
            center=box.center,
            base_size=base_size,
            template_shape=template_shape,
            projector=projector,
            filter=tfilter,
            scale=smodel,
        )

    def reinitialize(self, state: TrackerState, frame: Frame, box: BoundingBox) -> TrackerState:
        """Re-learn both filters from scratch at ``box`` (full rate).

        The PCA projector, base size and template geometry are kept, so the
        model shapes stay compatible with earlier snapshots.
        """
        return self._learn_fresh(frame, box, state.base_size, state.template_shape, state.projector)

    def step(self, state: TrackerState, frame: Frame) -> TrackerState:
        cfg = self.config
        scale = state.scale.current_scale
        patch_size = self._patch_size(state, scale)
        feats = self._features(frame, state.center, patch_size, state.template_shape, state.projector)
        y = filters.respond(state.filter, feats)
        peak, _ = filters.locate(y)
        if cfg.subcell:
            peak = filters.subcell_peak(y, peak)
        rows, cols = y.shape
        dr = _wrap(peak[0] - rows // 2, rows)
        dc = _wrap(peak[1] - cols // 2, cols)
        px_per_row = patch_size[1] / state.template_shape[0]
        px_per_col = patch_size[0] / state.template_shape[1]
        cx = state.center[0] + dc * cfg.cell_size * px_per_col
        cy = state.center[1] + dr * cfg.cell_size * px_per_row
        cx = float(np.clip(cx, 0.0, frame.width))
        cy = float(np.clip(cy, 0.0, frame.height))
        center = (cx, cy)

        smodel = filters.estimate_scale(
            state.scale, frame, center, state.base_size, state.projector
        )
        patch_size = self._patch_size(state, smodel.current_scale)
        feats = self._features(frame, center, patch_size, state.template_shape, state.projector)
        tfilter = filters.update(state.filter, feats)
        return replace(state, frame_index=frame.index, center=center, filter=tfilter, scale=smodel)


def _wrap(delta: float, n: int) -> float:
    if delta > n / 2:
        return delta - n
    if delta < -n / 2:
        return delta + n
    return delta
