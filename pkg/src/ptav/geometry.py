"""Boxes, frames and patch sampling.

Boxes use a top-left origin with real-valued ``(x, y, w, h)`` in pixels.
Pixel ``(r, c)`` covers the square ``[c, c+1) x [r, r+1)``, so its center
sits at ``(c + 0.5, r + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box {name} must be finite, got {getattr(self, name)!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got w={self.w}, h={self.h}")

    @classmethod
    def from_center(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    @property
    def area(self) -> float:
        return self.w * self.h

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def shifted(self, dx: float, dy: float) -> "BoundingBox":
        return BoundingBox(self.x + dx, self.y + dy, self.w, self.h)


@dataclass(frozen=True, eq=False)
class Frame:
    """A single-channel image with intensities in [0, 1].

    ``pixels`` is stored read-only so frames can be shared between the
    tracking and verifying workers without copies.
    """

    index: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame pixels must be a non-empty 2-D grid, got shape {px.shape}")
        if px.size and (px.min() < 0.0 or px.max() > 1.0):
            raise ValueError("frame pixel values must lie in [0, 1]")
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, index: int, image: np.ndarray) -> "Frame":
        """Build a frame from a raw image array.

        Integer images are scaled by their dtype maximum, color images are
        reduced to luminance with the Rec. 601 weights.
        """
        img = np.asarray(image)
        if np.issubdtype(img.dtype, np.integer):
            img = img.astype(np.float32) / np.iinfo(img.dtype).max
        else:
            img = img.astype(np.float32)
        if img.ndim == 3:
            if img.shape[2] == 4:
                img = img[..., :3]
            if img.shape[2] == 3:
                img = img @ np.asarray(LUMA_WEIGHTS, dtype=np.float32)
            elif img.shape[2] == 1:
                img = img[..., 0]
            else:
                raise ValueError(f"unsupported channel count {img.shape[2]}")
        return cls(index, np.clip(img, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def center_distance(a: BoundingBox, b: BoundingBox) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def crop_patch(frame: Frame, center: tuple[float, float], size: tuple[float, float]) -> np.ndarray:
    """Cut a ``size = (width, height)`` patch around ``center = (cx, cy)``.

    Sizes round to the nearest integer (ties up). Out-of-frame pixels
    replicate the nearest border pixel, so the result always has exactly
    the requested shape.
    """
    w, h = round_half_up(size[0]), round_half_up(size[1])
    if w < 1 or h < 1:
        raise ValueError(f"patch size must be >= 1 after rounding, got {size}")
    left = round_half_up(center[0] - w / 2.0)
    top = round_half_up(center[1] - h / 2.0)
    cols = np.clip(np.arange(left, left + w), 0, frame.width - 1)
    rows = np.clip(np.arange(top, top + h), 0, frame.height - 1)
    return frame.pixels[np.ix_(rows, cols)].astype(np.float64)


def sample_patches(
    frame: Frame,
    centers: np.ndarray,
    sizes: np.ndarray,
    out_shape: tuple[int, int],
) -> np.ndarray:
    """Bilinearly resample many regions to one ``out_shape = (rows, cols)``.

    ``centers`` and ``sizes`` are ``(N, 2)`` arrays of ``(x, y)`` and
    ``(w, h)`` in pixels. Returns an ``(N, rows, cols)`` stack. Borders are
    replicated. When a region is integer aligned and its size equals the
    output shape, the result is an exact copy of the covered pixels.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    sizes = np.atleast_2d(np.asarray(sizes, dtype=np.float64))
    rows, cols = out_shape
    n = centers.shape[0]
    u = (np.arange(cols) + 0.5) / cols - 0.5
    v = (np.arange(rows) + 0.5) / rows - 0.5
    xs = centers[:, 0:1] + sizes[:, 0:1] * u[None, :] - 0.5  # (N, cols)
    ys = centers[:, 1:2] + sizes[:, 1:2] * v[None, :] - 0.5  # (N, rows)
    yy = np.broadcast_to(ys[:, :, None], (n, rows, cols))
    xx = np.broadcast_to(xs[:, None, :], (n, rows, cols))
    coords = np.stack([yy.ravel(), xx.ravel()])
    out = ndimage.map_coordinates(
        frame.pixels.astype(np.float64), coords, order=1, mode="nearest"
    )
    return out.reshape(n, rows, cols)


def sample_patch(
    frame: Frame,
    center: tuple[float, float],
    size: tuple[float, float],
    out_shape: tuple[int, int],
) -> np.ndarray:
    return sample_patches(frame, np.asarray([center]), np.asarray([size]), out_shape)[0]
