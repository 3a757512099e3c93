"""Seeded synthetic sequences: a textured square over a noise background.

Supported events are a teleport (the object jumps to a new position at a
given frame), an occlusion window (the object is hidden by background
texture) and a linear scale ramp about the object center.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from .benchmark import Sequence
from .geometry import BoundingBox, Frame


@dataclass(frozen=True)
class SyntheticSpec:
    name: str = "synthetic"
    seed: int = 0
    n_frames: int = 120
    frame_width: int = 240
    frame_height: int = 240
    object_width: float = 32.0
    object_height: float = 32.0
    start_x: float = 60.0
    start_y: float = 60.0
    velocity_x: float = 1.0
    velocity_y: float = 0.5
    noise: float = 0.02
    background_contrast: float = 0.25
    texture_blur: float = 1.5
    teleport_frame: int = -1
    teleport_x: float = 0.0
    teleport_y: float = 0.0
    occlusion_start: int = -1
    occlusion_end: int = -1
    scale_end: float = 1.0

    def __post_init__(self):
        if self.n_frames < 1:
            raise ValueError("n_frames: must be >= 1")
        if self.frame_width < 1 or self.frame_height < 1:
            raise ValueError("frame_width/frame_height: must be >= 1")
        if self.object_width <= 0 or self.object_height <= 0:
            raise ValueError("object_width/object_height: must be > 0")
        max_scale = max(1.0, self.scale_end)
        if (
            self.object_width * max_scale > self.frame_width
            or self.object_height * max_scale > self.frame_height
        ):
            raise ValueError("object_width/object_height: object larger than frame")
        if self.scale_end <= 0:
            raise ValueError("scale_end: must be > 0")
        if self.noise < 0:
            raise ValueError("noise: must be >= 0")
        if self.occlusion_start >= 0 and self.occlusion_end < self.occlusion_start:
            raise ValueError("occlusion_end: must be >= occlusion_start")

    @classmethod
    def from_dict(cls, values: dict) -> "SyntheticSpec":
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ValueError(f"{key}: unknown synthetic spec field")
            default = getattr(cls, key)
            try:
                kwargs[key] = type(default)(raw) if not isinstance(default, str) else str(raw)
            except (TypeError, ValueError):
                raise ValueError(f"{key}: cannot parse {raw!r}") from None
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)


def _reflect(v: float, lo: float, hi: float) -> float:
    span = hi - lo
    if span <= 0:
        return lo
    t = (v - lo) % (2 * span)
    return lo + (t if t <= span else 2 * span - t)


def object_boxes(spec: SyntheticSpec) -> list[BoundingBox]:
    """Analytic ground truth: bouncing linear motion plus events."""
    boxes = []
    for t in range(spec.n_frames):
        frac = t / (spec.n_frames - 1) if spec.n_frames > 1 else 0.0
        s = 1.0 + (spec.scale_end - 1.0) * frac
        w, h = spec.object_width * s, spec.object_height * s
        if 0 <= spec.teleport_frame <= t:
            x0, y0, dt = spec.teleport_x, spec.teleport_y, t - spec.teleport_frame
        else:
            x0, y0, dt = spec.start_x, spec.start_y, t
        # motion path is defined for the unscaled box; scaling keeps its center
        cx = _reflect(x0 + spec.velocity_x * dt, 0.0, spec.frame_width - spec.object_width * max(1.0, spec.scale_end))
        cy = _reflect(y0 + spec.velocity_y * dt, 0.0, spec.frame_height - spec.object_height * max(1.0, spec.scale_end))
        cx += spec.object_width / 2.0
        cy += spec.object_height / 2.0
        boxes.append(BoundingBox.from_center(cx, cy, w, h))
    return boxes


def _texture(rng: np.random.Generator, shape, blur: float) -> np.ndarray:
    t = rng.random(shape)
    if blur > 0:
        t = ndimage.gaussian_filter(t, blur, mode="wrap")
    t -= t.min()
    peak = t.max()
    return t / peak if peak > 0 else t


def _render_object(canvas, box: BoundingBox, texture: np.ndarray):
    h_px, w_px = canvas.shape
    c0 = max(0, int(np.floor(box.x)))
    c1 = min(w_px, int(np.ceil(box.x + box.w)) + 1)
    r0 = max(0, int(np.floor(box.y)))
    r1 = min(h_px, int(np.ceil(box.y + box.h)) + 1)
    if c0 >= c1 or r0 >= r1:
        return
    u = (np.arange(c0, c1) + 0.5 - box.x) / box.w
    v = (np.arange(r0, r1) + 0.5 - box.y) / box.h
    inside = (v[:, None] >= 0) & (v[:, None] < 1) & (u[None, :] >= 0) & (u[None, :] < 1)
    th, tw = texture.shape
    ti = np.clip((v * th).astype(int), 0, th - 1)
    tj = np.clip((u * tw).astype(int), 0, tw - 1)
    src = texture[np.ix_(ti, tj)]
    region = canvas[r0:r1, c0:c1]
    region[inside] = src[inside]


def generate_synthetic(spec: SyntheticSpec | None = None) -> Sequence:
    spec = spec or SyntheticSpec()
    rng = np.random.default_rng(spec.seed)
    shape = (spec.frame_height, spec.frame_width)
    background = 0.5 + spec.background_contrast * (_texture(rng, shape, 2.0) - 0.5) * 2.0
    tex_shape = (max(4, int(round(spec.object_height))), max(4, int(round(spec.object_width))))
    texture = 0.1 + 0.8 * _texture(rng, tex_shape, spec.texture_blur)

    boxes = object_boxes(spec)
    frames = []
    for t, box in enumerate(boxes):
        canvas = background.copy()
        occluded = spec.occlusion_start >= 0 and spec.occlusion_start <= t <= spec.occlusion_end
        if not occluded:
            _render_object(canvas, box, texture)
        if spec.noise > 0:
            noise_rng = np.random.default_rng([spec.seed, t])
            canvas = canvas + noise_rng.normal(0.0, spec.noise, shape)
        quantized = np.round(np.clip(canvas, 0.0, 1.0) * 255.0) / 255.0
        frames.append(Frame(t, quantized.astype(np.float32)))
    return Sequence(name=spec.name, ground_truth=boxes, frames=frames)
