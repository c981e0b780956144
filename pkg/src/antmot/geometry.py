"""Axis-aligned box arithmetic, IoU, non-maximum suppression and anchor grids.

Boxes are continuous-valued (sub-pixel coordinates are allowed); nothing in
this module rounds. The two box parameterizations used throughout the
package, (left, top, width, height) and (center_x, center_y, width, height),
convert losslessly through :class:`BoundingBox`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundingBox",
    "Anchor",
    "iou",
    "iou_matrix",
    "nms",
    "generate_anchors",
]


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box in pixel coordinates with strictly positive size."""

    left: float
    top: float
    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError(
                f"box width and height must be positive, got "
                f"{self.width!r} x {self.height!r}"
            )

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    @classmethod
    def from_cxcywh(cls, cx: float, cy: float, w: float, h: float) -> "BoundingBox":
        """Build from center coordinates, the inverse of :meth:`to_cxcywh`."""
        return cls(cx - w / 2.0, cy - h / 2.0, w, h)

    def to_cxcywh(self) -> np.ndarray:
        cx, cy = self.center
        return np.array([cx, cy, self.width, self.height], dtype=float)

    def to_ltwh(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=float)


@dataclass(frozen=True)
class Anchor:
    """One proposal box of the anchor grid, tagged by its (scale, ratio) slot."""

    box: BoundingBox
    scale_index: int
    ratio_index: int


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1] and symmetric.

    Areas are derived from the same corner coordinates as the intersection
    so that identical boxes score exactly 1.0.
    """
    iw = min(a.right, b.right) - max(a.left, b.left)
    ih = min(a.bottom, b.bottom) - max(a.top, b.top)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    area_a = (a.right - a.left) * (a.bottom - a.top)
    area_b = (b.right - b.left) * (b.bottom - b.top)
    return inter / (area_a + area_b - inter)


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU between two box sequences as an (len(a), len(b)) array."""
    if len(boxes_a) == 0 or len(boxes_b) == 0:
        return np.zeros((len(boxes_a), len(boxes_b)))
    a = np.array([b.to_ltwh() for b in boxes_a])
    b = np.array([b.to_ltwh() for b in boxes_b])
    ax1, ay1 = a[:, 0, None], a[:, 1, None]
    ax2, ay2 = ax1 + a[:, 2, None], ay1 + a[:, 3, None]
    bx1, by1 = b[None, :, 0], b[None, :, 1]
    bx2, by2 = bx1 + b[None, :, 2], by1 + b[None, :, 3]
    iw = np.maximum(np.minimum(ax2, bx2) - np.maximum(ax1, bx1), 0.0)
    ih = np.maximum(np.minimum(ay2, by2) - np.maximum(ay1, by1), 0.0)
    inter = iw * ih
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    return inter / (area_a + area_b - inter)


def nms(boxes, scores, iou_threshold: float) -> list[int]:
    """Greedy non-maximum suppression.

    Boxes are visited in descending score order (ties broken by input index)
    and a box is suppressed when its IoU with an already kept, higher-scored
    box exceeds ``iou_threshold``. Returns the kept indices sorted by
    descending score.
    """
    if len(boxes) != len(scores):
        raise ValueError(
            f"boxes and scores must have equal length, got {len(boxes)} and {len(scores)}"
        )
    order = np.argsort(-np.asarray(scores, dtype=float), kind="stable")
    kept: list[int] = []
    for idx in order:
        idx = int(idx)
        if all(iou(boxes[idx], boxes[k]) <= iou_threshold for k in kept):
            kept.append(idx)
    return kept


def generate_anchors(
    feature_w: int,
    feature_h: int,
    stride: float,
    scales,
    ratios,
) -> list[Anchor]:
    """Anchor grid over a feature map: one box per (position, scale, ratio).

    The anchor for feature cell (row i, column j) is centered at
    ((j + 0.5) * stride, (i + 0.5) * stride). ``scales`` are square roots of
    anchor area; a ratio r (width over height) reshapes the square to
    width = scale * sqrt(r) and height = scale / sqrt(r), so every ratio at a
    given scale covers the same area.
    """
    if feature_w < 1 or feature_h < 1:
        raise ValueError("feature map dimensions must be >= 1")
    if len(scales) == 0 or len(ratios) == 0:
        raise ValueError("scales and ratios must be non-empty")
    anchors: list[Anchor] = []
    for i in range(feature_h):
        cy = (i + 0.5) * stride
        for j in range(feature_w):
            cx = (j + 0.5) * stride
            for si, scale in enumerate(scales):
                for ri, ratio in enumerate(ratios):
                    w = scale * np.sqrt(ratio)
                    h = scale / np.sqrt(ratio)
                    anchors.append(
                        Anchor(BoundingBox.from_cxcywh(cx, cy, w, h), si, ri)
                    )
    return anchors
