"""Multi-channel discriminative correlation filters.

The same numerator/denominator machinery drives the 2-D translation
filter and the 1-D scale filter: features carry the label's spatial axes
followed by one channel axis, and every DFT runs over the spatial axes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .features import FeatureMap, PcaProjector, cell_features, pca_project
from .geometry import Frame, sample_patches

DEFAULT_LAMBDA = 0.01
DEFAULT_ETA = 0.025
DEFAULT_SIGMA_FACTOR = 1.0 / 16.0
IMAG_TOLERANCE = 1e-6


class SingularFilterError(ArithmeticError):
    """Raised when ``lambda == 0`` and the denominator has an exact zero bin."""


@dataclass(frozen=True, eq=False)
class DesiredOutput:
    g: np.ndarray
    sigma_factor: float

    @property
    def G(self) -> np.ndarray:
        return np.fft.fftn(self.g)


@dataclass(frozen=True, eq=False)
class FilterModel:
    A: np.ndarray  # spatial shape + (d,), complex
    B: np.ndarray  # spatial shape, real and >= 0
    lam: float
    eta: float
    label: DesiredOutput
    template_size: tuple[int, ...] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.B.shape


def make_label(shape, sigma_factor: float = DEFAULT_SIGMA_FACTOR, sigma: float | None = None) -> DesiredOutput:
    """Gaussian with peak 1.0 at the center cell ``shape // 2``.

    The standard deviation is ``sigma_factor * sqrt(prod(shape))`` unless an
    explicit ``sigma`` is given (used by the 1-D scale label).
    """
    shape = tuple(int(s) for s in np.atleast_1d(shape))
    if any(s < 1 for s in shape):
        raise ValueError(f"label shape must be positive, got {shape}")
    if sigma is None:
        sigma = sigma_factor * float(np.sqrt(np.prod(shape)))
    grids = np.meshgrid(*[np.arange(s) - s // 2 for s in shape], indexing="ij")
    r2 = sum(g.astype(np.float64) ** 2 for g in grids)
    g = np.exp(-0.5 * r2 / sigma**2)
    return DesiredOutput(g=g, sigma_factor=sigma_factor)


def _cells(features) -> np.ndarray:
    if isinstance(features, FeatureMap):
        return features.cells
    return np.asarray(features, dtype=np.float64)


def _spectra(features, label: DesiredOutput):
    f = _cells(features)
    spatial = label.g.shape
    if f.shape[:-1] != spatial:
        raise ValueError(f"feature shape {f.shape[:-1]} does not match label shape {spatial}")
    axes = tuple(range(len(spatial)))
    F = np.fft.fftn(f, axes=axes)
    num = np.conj(label.G)[..., None] * F
    den = np.sum((np.conj(F) * F).real, axis=-1)
    return num, den


def train_initial(
    features,
    label: DesiredOutput,
    lam: float = DEFAULT_LAMBDA,
    eta: float = DEFAULT_ETA,
    template_size=None,
) -> FilterModel:
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    A, B = _spectra(features, label)
    return FilterModel(A=A, B=B, lam=lam, eta=eta, label=label, template_size=template_size)


def update(model: FilterModel, features, eta: float | None = None) -> FilterModel:
    """Linear interpolation of numerator and denominator with rate ``eta``."""
    eta = model.eta if eta is None else eta
    A_new, B_new = _spectra(features, model.label)
    if A_new.shape != model.A.shape:
        raise ValueError(f"feature shape {A_new.shape} does not match model {model.A.shape}")
    return replace(
        model,
        A=(1.0 - eta) * model.A + eta * A_new,
        B=(1.0 - eta) * model.B + eta * B_new,
    )


def respond(model: FilterModel, features) -> np.ndarray:
    z = _cells(features)
    spatial = model.shape
    if z.shape[:-1] != spatial or z.shape[-1] != model.A.shape[-1]:
        raise ValueError(f"feature shape {z.shape} does not match model {model.A.shape}")
    den = model.B + model.lam
    if model.lam == 0 and np.any(den == 0):
        raise SingularFilterError("denominator has zero bins and lambda is 0")
    axes = tuple(range(len(spatial)))
    Z = np.fft.fftn(z, axes=axes)
    Y = np.sum(np.conj(model.A) * Z, axis=-1) / den
    y = np.fft.ifftn(Y)
    residue = np.max(np.abs(y.imag)) if y.size else 0.0
    scale = max(1.0, float(np.max(np.abs(y.real))) if y.size else 1.0)
    if residue >= IMAG_TOLERANCE * scale:
        raise ArithmeticError(f"response has imaginary residue {residue:.3g}")
    return y.real


def locate(y: np.ndarray) -> tuple[tuple[int, ...], float]:
    """Position of the maximum; ties go to the smallest row-major index."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty response")
    flat = int(np.argmax(y))
    idx = tuple(int(i) for i in np.unravel_index(flat, y.shape))
    return idx, float(y.flat[flat])


def subcell_peak(y: np.ndarray, peak: tuple[int, int]) -> tuple[float, float]:
    """Parabolic refinement of an integer peak, using circular neighbours."""
    out = []
    for axis, p in enumerate(peak):
        n = y.shape[axis]
        if n < 3:
            out.append(float(p))
            continue
        idx = list(peak)
        idx[axis] = (p - 1) % n
        left = y[tuple(idx)]
        idx[axis] = (p + 1) % n
        right = y[tuple(idx)]
        mid = y[tuple(peak)]
        denom = left - 2 * mid + right
        out.append(float(p) + (0.5 * (left - right) / denom if denom != 0 else 0.0))
    return tuple(out)


# -- scale estimation ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScaleModel:
    num_scales: int
    scale_step: float
    current_scale: float
    template_shape: tuple[int, int]  # (rows, cols) in pixels of each resized sample
    filter: FilterModel | None = None
    min_scale: float = 0.0
    max_scale: float = np.inf
    cell_size: int = 4
    last_level: int = 0

    def __post_init__(self):
        if self.num_scales < 1 or self.num_scales % 2 == 0:
            raise ValueError("num_scales must be a positive odd count")
        if self.scale_step <= 1.0:
            raise ValueError("scale_step must be > 1")
        if self.current_scale <= 0:
            raise ValueError("current_scale must be > 0")

    @property
    def levels(self) -> np.ndarray:
        half = (self.num_scales - 1) // 2
        return np.arange(-half, half + 1)

    @property
    def factors(self) -> np.ndarray:
        return self.scale_step ** self.levels.astype(np.float64)


def scale_samples(
    model: ScaleModel,
    frame: Frame,
    center: tuple[float, float],
    base_size: tuple[float, float],
    projector: PcaProjector | None = None,
) -> np.ndarray:
    """One feature vector per pyramid level, shape ``(S, D)``."""
    w, h = base_size
    sizes = np.outer(model.factors * model.current_scale, [w, h])
    centers = np.repeat(np.asarray([center], dtype=np.float64), len(sizes), axis=0)
    patches = sample_patches(frame, centers, sizes, model.template_shape)
    feats = cell_features(patches, model.cell_size)
    if projector is not None:
        feats = pca_project(projector, feats).cells
    vecs = feats.reshape(len(sizes), -1)
    if model.num_scales > 2:
        vecs = vecs * np.hanning(model.num_scales + 2)[1:-1, None]
    return vecs


def init_scale_model(
    frame: Frame,
    center: tuple[float, float],
    base_size: tuple[float, float],
    *,
    num_scales: int = 17,
    scale_step: float = 1.02,
    scale_sigma: float = 1.0,
    lam: float = DEFAULT_LAMBDA,
    eta: float = DEFAULT_ETA,
    max_area: float = 512.0,
    cell_size: int = 4,
    projector: PcaProjector | None = None,
    current_scale: float = 1.0,
    min_scale: float = 0.0,
    max_scale: float = np.inf,
) -> ScaleModel:
    w, h = base_size
    shrink = min(1.0, float(np.sqrt(max_area / (w * h))))
    rows = max(2 * cell_size, int(round(h * shrink / cell_size)) * cell_size)
    cols = max(2 * cell_size, int(round(w * shrink / cell_size)) * cell_size)
    model = ScaleModel(
        num_scales=num_scales,
        scale_step=scale_step,
        current_scale=current_scale,
        template_shape=(rows, cols),
        cell_size=cell_size,
        min_scale=min_scale,
        max_scale=max_scale,
    )
    label = make_label((num_scales,), sigma=scale_sigma)
    samples = scale_samples(model, frame, center, base_size, projector)
    return replace(model, filter=train_initial(samples, label, lam, eta))


def estimate_scale(
    model: ScaleModel,
    frame: Frame,
    center: tuple[float, float],
    base_size: tuple[float, float],
    projector: PcaProjector | None = None,
    learn: bool = True,
) -> ScaleModel:
    """Score the pyramid, rescale by the best level, then learn at the new scale."""
    samples = scale_samples(model, frame, center, base_size, projector)
    (peak,), _ = locate(respond(model.filter, samples))
    level = int(model.levels[peak])
    new_scale = float(
        np.clip(model.current_scale * model.scale_step**level, model.min_scale, model.max_scale)
    )
    out = replace(model, current_scale=new_scale, last_level=level)
    if not learn:
        return out
    if new_scale != model.current_scale:
        samples = scale_samples(out, frame, center, base_size, projector)
    return replace(out, filter=update(model.filter, samples))
