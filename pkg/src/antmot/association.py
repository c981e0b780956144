"""Track-to-detection association.

Builds gated cost matrices from gallery appearance distances and Kalman
motion distances, solves them exactly with the Jonker-Volgenant formulation
of the linear assignment problem (scipy's ``linear_sum_assignment``), and
runs the age-prioritized matching cascade with an IoU fallback stage.

Infeasible pairs carry a finite sentinel cost (``INFEASIBLE_COST``); a pair
assigned at sentinel cost is reported as unmatched, never as a match.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .descriptor import is_unit
from .geometry import iou_matrix, BoundingBox
from .motion import CHI2_GATE_4DOF_95, KalmanFilter

__all__ = [
    "INFEASIBLE_COST",
    "APPEARANCE_GATE_DEFAULT",
    "Gallery",
    "gallery_distance",
    "appearance_gate",
    "combined_gate",
    "CostMatrix",
    "AssignmentResult",
    "solve_assignment",
    "matching_cascade",
    "iou_match",
]

INFEASIBLE_COST = 1e5
APPEARANCE_GATE_DEFAULT = 0.2


class Gallery:
    """Bounded FIFO of a track's most recent appearance descriptors.

    Holds at most ``capacity`` unit-norm vectors; appending beyond capacity
    overwrites the oldest. Storage is a preallocated ring buffer so the
    matrix view handed to the cascade every frame costs nothing.
    """

    def __init__(self, capacity: int = 100):
        if capacity < 1:
            raise ValueError(f"gallery capacity must be >= 1, got {capacity}")
        self.capacity = capacity
        self._buffer: np.ndarray | None = None
        self._size = 0
        self._next = 0

    def __len__(self) -> int:
        return self._size

    def append(self, descriptor) -> None:
        descriptor = np.asarray(descriptor, dtype=float)
        if not is_unit(descriptor):
            raise ValueError("gallery descriptors must be unit-norm")
        if self._buffer is None:
            self._buffer = np.empty((self.capacity, descriptor.shape[0]))
        elif descriptor.shape[0] != self._buffer.shape[1]:
            raise ValueError(
                f"descriptor dimension {descriptor.shape[0]} does not match "
                f"gallery dimension {self._buffer.shape[1]}"
            )
        self._buffer[self._next] = descriptor
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def as_matrix(self) -> np.ndarray:
        """The stored descriptors as an (n, dim) view (ring order)."""
        if self._size == 0:
            raise ValueError("gallery is empty")
        return self._buffer[: self._size]


def gallery_distance(gallery: Gallery, descriptor) -> float:
    """Smallest cosine distance between a descriptor and the gallery.

    Clamped at 0 so that float wobble on near-identical unit vectors cannot
    produce a negative distance.
    """
    sims = gallery.as_matrix() @ np.asarray(descriptor, dtype=float)
    return max(float(1.0 - sims.max()), 0.0)


def appearance_gate(d2, threshold: float = APPEARANCE_GATE_DEFAULT):
    """1 where the appearance distance is strictly below the threshold."""
    return np.asarray(d2) < threshold if np.ndim(d2) else bool(d2 < threshold)


def combined_gate(b1, b2):
    """Product of the motion and appearance signals; 1 only when both pass."""
    return b1 & b2 if np.ndim(b1) or np.ndim(b2) else bool(b1 and b2)


@dataclass
class CostMatrix:
    """Rectangular association costs with identified rows and columns.

    ``costs[i, j]`` is the cost of pairing ``track_ids[i]`` with
    ``detection_indices[j]``; entries at or above ``sentinel`` are infeasible.
    """

    costs: np.ndarray
    track_ids: list[int]
    detection_indices: list[int]
    sentinel: float = INFEASIBLE_COST

    def __post_init__(self) -> None:
        self.costs = np.atleast_2d(np.asarray(self.costs, dtype=float))
        if self.costs.size == 0:
            self.costs = self.costs.reshape(len(self.track_ids), len(self.detection_indices))
        if self.costs.shape != (len(self.track_ids), len(self.detection_indices)):
            raise ValueError(
                f"cost shape {self.costs.shape} does not match "
                f"{len(self.track_ids)} tracks x {len(self.detection_indices)} detections"
            )
        feasible = self.costs[self.costs < self.sentinel]
        if feasible.size and (np.any(feasible < 0) or not np.all(np.isfinite(feasible))):
            raise ValueError("feasible costs must be finite and non-negative")


@dataclass
class AssignmentResult:
    """Partition of tracks and detections into matches and leftovers."""

    matches: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_detections: list[int] = field(default_factory=list)


def solve_assignment(cost: CostMatrix) -> AssignmentResult:
    """Minimum-cost assignment over the feasible entries of a cost matrix.

    Among assignments of maximal feasible cardinality the total feasible cost
    is minimal (the sentinel dominates any feasible total, so the solver
    avoids sentinel pairs whenever possible). Rows or columns whose only
    options are sentinels come back unmatched. Handles rectangular and empty
    matrices.
    """
    n_rows, n_cols = cost.costs.shape
    if n_rows == 0 or n_cols == 0:
        return AssignmentResult(
            [], list(cost.track_ids), list(cost.detection_indices)
        )
    rows, cols = linear_sum_assignment(cost.costs)
    matched_rows, matched_cols = set(), set()
    matches = []
    for r, c in zip(rows, cols):
        if cost.costs[r, c] >= cost.sentinel:
            continue
        matches.append((cost.track_ids[r], cost.detection_indices[c]))
        matched_rows.add(r)
        matched_cols.add(c)
    unmatched_tracks = [tid for i, tid in enumerate(cost.track_ids) if i not in matched_rows]
    unmatched_detections = [
        d for j, d in enumerate(cost.detection_indices) if j not in matched_cols
    ]
    return AssignmentResult(matches, unmatched_tracks, unmatched_detections)


def _measurements(detections, indices) -> np.ndarray:
    return np.array([detections[j].box.to_cxcywh() for j in indices])


def _descriptor_rows(detections, indices) -> np.ndarray:
    rows = []
    for j in indices:
        if detections[j].descriptor is None:
            raise ValueError(f"detection {j} carries no appearance descriptor")
        rows.append(detections[j].descriptor)
    return np.array(rows)


def _gallery_cost_rows(tracks, det_descriptors: np.ndarray) -> np.ndarray:
    """Minimum cosine distance of each track's gallery to each descriptor."""
    mats = [t.gallery.as_matrix() for t in tracks]
    offsets = np.cumsum([0] + [m.shape[0] for m in mats[:-1]])
    sims = np.vstack(mats) @ det_descriptors.T
    return np.maximum(1.0 - np.maximum.reduceat(sims, offsets, axis=0), 0.0)


def matching_cascade(
    kf: KalmanFilter,
    tracks,
    detections,
    detection_indices=None,
    *,
    max_age: int = 30,
    motion_threshold: float = CHI2_GATE_4DOF_95,
    appearance_threshold: float = APPEARANCE_GATE_DEFAULT,
    sentinel: float = INFEASIBLE_COST,
) -> AssignmentResult:
    """Age-prioritized association of tracks with detections.

    For each age level n = 1..max_age in turn, the tracks whose
    time_since_update equals n compete for the detections still unmatched.
    The association cost is the gallery appearance distance; a pair is
    feasible only where both the motion gate (squared Mahalanobis distance
    below ``motion_threshold``) and the appearance gate (distance below
    ``appearance_threshold``) pass, and assigned pairs whose cost reaches
    ``appearance_threshold`` are rejected. Recently seen tracks therefore
    always win over long-lost ones, whatever the costs.

    Tracks must expose ``track_id``, ``time_since_update``, ``kalman`` and a
    non-empty ``gallery``; detections must carry descriptors.
    """
    if detection_indices is None:
        detection_indices = list(range(len(detections)))
    matches: list[tuple[int, int]] = []
    unmatched = list(detection_indices)
    matched_track_ids: set[int] = set()
    if unmatched and tracks:
        all_z = _measurements(detections, unmatched)
        all_r = _descriptor_rows(detections, unmatched)
        pos = {d: i for i, d in enumerate(unmatched)}
        for age in range(1, max_age + 1):
            if not unmatched:
                break
            level = [t for t in tracks if t.time_since_update == age]
            if not level:
                continue
            sel = [pos[d] for d in unmatched]
            z = all_z[sel]
            r = all_r[sel]
            d2 = _gallery_cost_rows(level, r)
            d1 = kf.gating_distances([t.kalman for t in level], z)
            feasible = combined_gate(d1 < motion_threshold, d2 < appearance_threshold)
            costs = np.where(feasible, d2, sentinel)
            level_ids = [t.track_id for t in level]
            result = solve_assignment(
                CostMatrix(costs, level_ids, list(unmatched), sentinel)
            )
            taken = set()
            for tid, det in result.matches:
                if costs[level_ids.index(tid), unmatched.index(det)] >= appearance_threshold:
                    continue
                matches.append((tid, det))
                matched_track_ids.add(tid)
                taken.add(det)
            unmatched = [d for d in unmatched if d not in taken]
    unmatched_tracks = [t.track_id for t in tracks if t.track_id not in matched_track_ids]
    return AssignmentResult(matches, unmatched_tracks, unmatched)


def iou_match(
    tracks,
    detections,
    detection_indices=None,
    max_distance: float = 0.7,
    *,
    kf: KalmanFilter | None = None,
    motion_threshold: float = CHI2_GATE_4DOF_95,
    sentinel: float = INFEASIBLE_COST,
) -> AssignmentResult:
    """Assignment on 1 - IoU between predicted track boxes and detections.

    Entries whose cost exceeds ``max_distance`` are infeasible. When ``kf``
    is given the motion gate is applied as well (the appearance-free degraded
    mode uses this). Tracks whose predicted box has collapsed to non-positive
    size are treated as infeasible everywhere.
    """
    if detection_indices is None:
        detection_indices = list(range(len(detections)))
    track_ids = [t.track_id for t in tracks]
    if not tracks or not detection_indices:
        return AssignmentResult([], track_ids, list(detection_indices))
    det_boxes = [detections[j].box for j in detection_indices]
    costs = np.full((len(tracks), len(detection_indices)), sentinel)
    valid_rows = []
    pred_boxes = []
    for i, t in enumerate(tracks):
        cx, cy, w, h = t.kalman.box_mean()
        if w > 0 and h > 0:
            valid_rows.append(i)
            pred_boxes.append(BoundingBox.from_cxcywh(cx, cy, w, h))
    if valid_rows:
        overlap = iou_matrix(pred_boxes, det_boxes)
        costs[valid_rows, :] = 1.0 - overlap
        costs[costs > max_distance] = sentinel
        if kf is not None:
            z = _measurements(detections, detection_indices)
            for row, i in enumerate(valid_rows):
                d1 = kf.mahalanobis_sq(tracks[i].kalman, z)
                costs[i, d1 >= motion_threshold] = sentinel
    return solve_assignment(
        CostMatrix(costs, track_ids, list(detection_indices), sentinel)
    )
