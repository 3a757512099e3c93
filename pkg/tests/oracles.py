"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import numpy as np


def dft_matrix(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n)


def naive_dft2(x: np.ndarray) -> np.ndarray:
    """2-D DFT by explicit O(n^2) matrix products, channels on the last axis."""
    r, c = x.shape[:2]
    wr, wc = dft_matrix(r), dft_matrix(c)
    if x.ndim == 2:
        return wr @ x @ wc.T
    return np.stack([wr @ x[..., l] @ wc.T for l in range(x.shape[-1])], axis=-1)


def naive_idft2(x: np.ndarray) -> np.ndarray:
    r, c = x.shape
    return np.conj(dft_matrix(r)) @ x @ np.conj(dft_matrix(c)).T / (r * c)


def filter_terms(f: np.ndarray, g: np.ndarray):
    """Numerator per channel and shared denominator, per frequency."""
    F = naive_dft2(f)
    G = naive_dft2(g)
    A = np.conj(G)[..., None] * F
    B = np.sum(np.abs(F) ** 2, axis=-1)
    return A, B


def spatial_response(f: np.ndarray, g: np.ndarray, z: np.ndarray, lam: float) -> np.ndarray:
    """Response as a circular cross-correlation of spatial filters with ``z``.

    ``h_l = idft(A_l / (B + lam))`` and ``y[n] = sum_l sum_m conj(h_l[m]) z_l[m + n]``.
    """
    A, B = filter_terms(f, g)
    rows, cols, d = f.shape
    y = np.zeros((rows, cols), dtype=complex)
    for l in range(d):
        h = naive_idft2(A[..., l] / (B + lam))
        for dr in range(rows):
            for dc in range(cols):
                shifted = np.roll(z[..., l], (-dr, -dc), axis=(0, 1))
                y[dr, dc] += np.sum(np.conj(h) * shifted)
    return y


def metric_fixture():
    """Five hand-built (prediction, ground truth) pairs with mixed errors."""
    from ptav.geometry import BoundingBox

    gt = [BoundingBox(10, 10, 20, 20)] * 5
    pred = [
        BoundingBox(10, 10, 20, 20),  # exact
        BoundingBox(13, 14, 20, 20),  # 5 px off, iou 0.5798...
        BoundingBox(10, 10, 20, 10),  # 5 px off, iou exactly 0.5
        BoundingBox(30, 10, 20, 20),  # 20 px off, touching
        BoundingBox(60, 60, 8, 8),  # far away
    ]
    return pred, gt


def brute_force_metrics(pred, gt):
    """DPR@20, OSR@0.5 (>=), precision/success curves and AUC by plain loops."""
    errs, ious = [], []
    for p, g in zip(pred, gt):
        pcx, pcy = p.x + p.w / 2, p.y + p.h / 2
        gcx, gcy = g.x + g.w / 2, g.y + g.h / 2
        errs.append(((pcx - gcx) ** 2 + (pcy - gcy) ** 2) ** 0.5)
        ix = max(0.0, min(p.x + p.w, g.x + g.w) - max(p.x, g.x))
        iy = max(0.0, min(p.y + p.h, g.y + g.h) - max(p.y, g.y))
        inter = ix * iy
        ious.append(inter / (p.w * p.h + g.w * g.h - inter))
    n = len(pred)
    precision = [sum(e <= t for e in errs) / n for t in range(51)]
    success = [sum(o > t / 20 for o in ious) / n for t in range(21)]
    return {
        "dpr": sum(e <= 20 for e in errs) / n,
        "osr": sum(o >= 0.5 for o in ious) / n,
        "precision": precision,
        "success": success,
        "auc": sum(success) / len(success),
    }
