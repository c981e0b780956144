"""Forward math of the position-sensitive detection head.

Everything here is a pure function of plain arrays, so the pooling, voting,
softmax and loss stages can be exercised without any trained network: score
maps arrive as inputs instead of being produced by convolutions.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import BoundingBox

__all__ = [
    "ScoreMaps",
    "RegressionTarget",
    "psroi_pool",
    "vote",
    "softmax",
    "smooth_l1",
    "detection_loss",
]

PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class ScoreMaps:
    """Position-sensitive score maps: one (map_h, map_w) plane per (i, j, c).

    ``data`` has shape (k*k*C, map_h, map_w) with channel layout
    ``(i * k + j) * num_categories + c`` for grid cell (i, j) and category c,
    i indexing rows (vertical) and j columns (horizontal).
    """

    data: np.ndarray
    k: int
    num_categories: int

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=float)
        object.__setattr__(self, "data", data)
        if data.ndim != 3:
            raise ValueError(f"score maps must be 3-d, got shape {data.shape}")
        expected = self.k * self.k * self.num_categories
        if data.shape[0] != expected:
            raise ValueError(
                f"expected {expected} channels (k={self.k}, C={self.num_categories}), "
                f"got {data.shape[0]}"
            )
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise ValueError("score maps must have positive spatial size")

    @property
    def map_h(self) -> int:
        return self.data.shape[1]

    @property
    def map_w(self) -> int:
        return self.data.shape[2]

    def plane(self, i: int, j: int, c: int) -> np.ndarray:
        return self.data[(i * self.k + j) * self.num_categories + c]


@dataclass(frozen=True)
class RegressionTarget:
    """Box regression 4-vector (center x, center y, width, height)."""

    t: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        object.__setattr__(self, "t", t)
        if t.shape != (4,):
            raise ValueError(f"regression target must be a 4-vector, got shape {t.shape}")
        if not np.all(np.isfinite(t)):
            raise ValueError("regression target components must be finite")


def psroi_pool(maps: ScoreMaps, roi: BoundingBox, spatial_scale: float = 1.0) -> np.ndarray:
    """Position-sensitive average pooling of a region of interest.

    The RoI (scaled into map coordinates by ``spatial_scale``) is split into
    k x k equal sub-rectangles; bin (i, j, c) averages score plane (i, j, c)
    over the pixels whose centers fall in sub-rectangle (i, j). Bins whose
    sub-rectangle captures no pixel center are 0. Returns a (k, k, C) array.
    """
    k, C = maps.k, maps.num_categories
    x0 = roi.left * spatial_scale
    y0 = roi.top * spatial_scale
    w = roi.width * spatial_scale
    h = roi.height * spatial_scale
    if x0 < 0 or y0 < 0 or x0 + w > maps.map_w or y0 + h > maps.map_h:
        raise ValueError(
            f"roi {(x0, y0, w, h)} lies outside the {maps.map_w}x{maps.map_h} score map"
        )
    # pixel (px, py) has its center at (px + 0.5, py + 0.5)
    cx = np.arange(maps.map_w) + 0.5
    cy = np.arange(maps.map_h) + 0.5
    pooled = np.zeros((k, k, C))
    for i in range(k):
        rows = (cy >= y0 + i * h / k) & (cy < y0 + (i + 1) * h / k)
        for j in range(k):
            cols = (cx >= x0 + j * w / k) & (cx < x0 + (j + 1) * w / k)
            n = int(rows.sum()) * int(cols.sum())
            if n == 0:
                continue
            for c in range(C):
                plane = maps.plane(i, j, c)
                pooled[i, j, c] = plane[np.ix_(rows, cols)].sum() / n
    return pooled


def vote(pooled: np.ndarray) -> np.ndarray:
    """Per-category sum of all k*k pooled bins; (k, k, C) -> (C,)."""
    pooled = np.asarray(pooled, dtype=float)
    if pooled.ndim != 3 or pooled.shape[0] != pooled.shape[1]:
        raise ValueError(f"expected a (k, k, C) grid, got shape {pooled.shape}")
    if not np.all(np.isfinite(pooled)):
        raise ValueError("pooled bins must be finite")
    return pooled.sum(axis=(0, 1))


def softmax(scores) -> np.ndarray:
    """Numerically stable softmax over a score vector."""
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise ValueError("softmax scores must be finite")
    shifted = scores - scores.max()
    e = np.exp(shifted)
    return e / e.sum()


def smooth_l1(x: float) -> float:
    """Huber-style penalty: quadratic inside the unit interval, linear outside."""
    ax = abs(x)
    return 0.5 * x * x if ax < 1.0 else ax - 0.5


def detection_loss(
    class_probs,
    gt_class: int,
    reg_pred,
    reg_target,
    lam: float = 1.0,
    penalty=smooth_l1,
) -> float:
    """Multitask detection loss: cross-entropy plus gated box regression.

    The regression term sums ``penalty`` over the four coordinate residuals
    and only contributes for foreground (gt_class == 1); background RoIs are
    scored by classification alone. A zero probability at the true class is
    clamped to 1e-12 with a warning rather than producing an infinite loss.
    """
    probs = np.asarray(class_probs, dtype=float)
    if probs.ndim != 1 or gt_class < 0 or gt_class >= probs.shape[0]:
        raise ValueError("gt_class must index the class probability vector")
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-6:
        raise ValueError("class_probs must be a probability distribution")
    p = probs[gt_class]
    if p < PROB_FLOOR:
        warnings.warn(
            f"probability {p:g} at the true class clamped to {PROB_FLOOR:g}",
            RuntimeWarning,
            stacklevel=2,
        )
        p = PROB_FLOOR
    loss = -float(np.log(p))
    if gt_class == 1:
        pred = reg_pred.t if isinstance(reg_pred, RegressionTarget) else np.asarray(reg_pred, dtype=float)
        target = reg_target.t if isinstance(reg_target, RegressionTarget) else np.asarray(reg_target, dtype=float)
        residuals = target - pred
        loss += lam * float(sum(penalty(r) for r in residuals))
    return loss
