"""Cell features (intensity + unsigned HOG), Hann windowing and PCA."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_CELL_SIZE = 4
DEFAULT_BINS = 9
HOG_EPS = 1e-5


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """``cells`` has shape ``(rows, cols, d)``."""

    cells: np.ndarray
    cell_size: int = DEFAULT_CELL_SIZE

    @property
    def d(self) -> int:
        return self.cells.shape[-1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape[:2]


@dataclass(frozen=True, eq=False)
class PcaProjector:
    basis: np.ndarray  # (d_in, d_out), orthonormal columns
    mean: np.ndarray  # (d_in,)

    @property
    def d_in(self) -> int:
        return self.basis.shape[0]

    @property
    def d_out(self) -> int:
        return self.basis.shape[1]


def cell_features(
    patches: np.ndarray, cell_size: int = DEFAULT_CELL_SIZE, n_bins: int = DEFAULT_BINS
) -> np.ndarray:
    """Vectorised core of :func:`extract_features`.

    Accepts ``(H, W)`` or ``(N, H, W)`` and returns ``(rows, cols, 1 + n_bins)``
    or ``(N, rows, cols, 1 + n_bins)``.
    """
    patches = np.asarray(patches, dtype=np.float64)
    single = patches.ndim == 2
    if single:
        patches = patches[None]
    n, height, width = patches.shape
    rows, cols = height // cell_size, width // cell_size
    if rows < 1 or cols < 1:
        raise ValueError(
            f"patch {height}x{width} is smaller than one {cell_size}x{cell_size} cell"
        )

    if height > 1 and width > 1:
        gy, gx = np.gradient(patches, axis=(1, 2))
    else:
        gy = np.gradient(patches, axis=1) if height > 1 else np.zeros_like(patches)
        gx = np.gradient(patches, axis=2) if width > 1 else np.zeros_like(patches)
    h_used, w_used = rows * cell_size, cols * cell_size
    gx = gx[:, :h_used, :w_used]
    gy = gy[:, :h_used, :w_used]
    mag = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), np.pi)
    bins = np.floor(angle * (n_bins / np.pi)).astype(np.int64) % n_bins

    r_idx = np.arange(h_used) // cell_size
    c_idx = np.arange(w_used) // cell_size
    cell_id = r_idx[:, None] * cols + c_idx[None, :]
    flat = (np.arange(n)[:, None, None] * (rows * cols) + cell_id[None]) * n_bins + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=n * rows * cols * n_bins)
    hist = hist.reshape(n, rows, cols, n_bins)
    hist /= np.sqrt(np.sum(hist * hist, axis=-1, keepdims=True) + HOG_EPS**2)

    blocks = patches[:, :h_used, :w_used].reshape(n, rows, cell_size, cols, cell_size)
    intensity = blocks.mean(axis=(2, 4)) - 0.5

    out = np.concatenate([intensity[..., None], hist], axis=-1)
    return out[0] if single else out


def extract_features(
    patch: np.ndarray, cell_size: int = DEFAULT_CELL_SIZE, n_bins: int = DEFAULT_BINS
) -> FeatureMap:
    """Per-cell features of a 2-D patch.

    Channel 0 is the mean cell intensity, centered on mid-gray (0.5).
    Channels ``1..n_bins`` hold an unsigned orientation histogram of
    gradient magnitude, L2-normalised per cell. Trailing rows/columns that
    do not fill a whole cell are ignored.
    """
    return FeatureMap(cell_features(patch, cell_size, n_bins), cell_size)


def hann2d(rows: int, cols: int) -> np.ndarray:
    return np.outer(np.hanning(rows), np.hanning(cols))


def apply_hann_window(fmap: FeatureMap) -> FeatureMap:
    rows, cols = fmap.shape
    return FeatureMap(fmap.cells * hann2d(rows, cols)[..., None], fmap.cell_size)


def _pooled(samples) -> np.ndarray:
    if isinstance(samples, (FeatureMap, np.ndarray)):
        samples = [samples]
    vecs = []
    for s in samples:
        cells = s.cells if isinstance(s, FeatureMap) else np.asarray(s, dtype=np.float64)
        vecs.append(cells.reshape(-1, cells.shape[-1]))
    if not vecs:
        raise ValueError("pca_fit needs at least one sample")
    return np.concatenate(vecs, axis=0)


def pca_fit(samples, d_out: int) -> PcaProjector:
    """Fit a projector onto the top-``d_out`` variance directions.

    Per-cell feature vectors from all samples are pooled. Basis columns
    are ordered by decreasing eigenvalue and sign-fixed so that each
    column's largest-magnitude entry is positive.
    """
    x = _pooled(samples)
    d_in = x.shape[1]
    if not 1 <= d_out <= d_in:
        raise ValueError(f"d_out must be in [1, {d_in}], got {d_out}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / x.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    basis = evecs[:, ::-1][:, :d_out].copy()
    pivot = np.argmax(np.abs(basis), axis=0)
    signs = np.sign(basis[pivot, np.arange(d_out)])
    basis *= np.where(signs == 0, 1.0, signs)
    return PcaProjector(basis=basis, mean=mean)


def pca_project(p: PcaProjector, fmap: FeatureMap) -> FeatureMap:
    cells = fmap.cells if isinstance(fmap, FeatureMap) else np.asarray(fmap)
    if cells.shape[-1] != p.d_in:
        raise ValueError(f"feature map has {cells.shape[-1]} channels, projector expects {p.d_in}")
    cell_size = fmap.cell_size if isinstance(fmap, FeatureMap) else DEFAULT_CELL_SIZE
    return FeatureMap((cells - p.mean) @ p.basis, cell_size)


def pca_back_project(p: PcaProjector, fmap: FeatureMap) -> FeatureMap:
    cells = fmap.cells if isinstance(fmap, FeatureMap) else np.asarray(fmap)
    if cells.shape[-1] != p.d_out:
        raise ValueError(f"feature map has {cells.shape[-1]} channels, projector emits {p.d_out}")
    cell_size = fmap.cell_size if isinstance(fmap, FeatureMap) else DEFAULT_CELL_SIZE
    return FeatureMap(cells @ p.basis.T + p.mean, cell_size)
