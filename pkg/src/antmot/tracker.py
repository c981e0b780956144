"""Online per-frame tracking state machine.

Each frame: predict all live tracks forward, associate confirmed tracks to
detections through the appearance matching cascade, give unconfirmed tracks
and just-missed confirmed tracks one IoU fallback round, update matched
tracks, start a new track for every leftover detection, and apply the
lifecycle rules (confirmation streak, immediate deletion of missed
unconfirmed tracks, deletion after ``max_age`` consecutive misses).

A :class:`Tracker` owns mutable state for one sequence and must not be
shared between threads; independent sequences get independent instances.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import association
from .association import Gallery
from .geometry import BoundingBox
from .motion import CHI2_GATE_4DOF_95, KalmanFilter, KalmanState

__all__ = [
    "Detection",
    "TrackState",
    "Track",
    "TrackerConfig",
    "FrameOutput",
    "Tracker",
]


@dataclass(frozen=True)
class Detection:
    """One frame observation: a box, its confidence and an optional descriptor."""

    box: BoundingBox
    confidence: float = 1.0
    descriptor: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence!r}")
        if self.descriptor is not None:
            object.__setattr__(
                self, "descriptor", np.asarray(self.descriptor, dtype=float)
            )


class TrackState(enum.Enum):
    UNCONFIRMED = "unconfirmed"
    CONFIRMED = "confirmed"
    DELETED = "deleted"


class Track:
    """A persistent identity: Kalman state, descriptor gallery and lifecycle.

    ``hits`` counts consecutive successful associations (reset by a miss);
    ``time_since_update`` counts frames since the last association and is 0
    right after one; ``age`` counts frames since birth.
    """

    def __init__(self, track_id: int, kalman: KalmanState, gallery_capacity: int):
        self.track_id = track_id
        self.state = TrackState.UNCONFIRMED
        self.kalman = kalman
        self.gallery = Gallery(gallery_capacity)
        self.hits = 1
        self.time_since_update = 0
        self.age = 1

    def is_confirmed(self) -> bool:
        return self.state is TrackState.CONFIRMED

    def is_deleted(self) -> bool:
        return self.state is TrackState.DELETED

    def current_box(self) -> BoundingBox:
        cx, cy, w, h = self.kalman.box_mean()
        return BoundingBox.from_cxcywh(cx, cy, w, h)


@dataclass
class TrackerConfig:
    """Thresholds and lifecycle constants of the tracking loop."""

    motion_gate: float = CHI2_GATE_4DOF_95
    appearance_gate: float = 0.2
    max_age: int = 30
    n_init: int = 3
    gallery_capacity: int = 100
    iou_max_distance: float = 0.7
    min_confidence: float = 0.0
    appearance_matching: bool = True
    std_weight_position: float = 1.0 / 20
    std_weight_velocity: float = 1.0 / 160

    def __post_init__(self) -> None:
        if self.motion_gate <= 0 or self.appearance_gate <= 0:
            raise ValueError("gate thresholds must be positive")
        if self.max_age < 1 or self.n_init < 1 or self.gallery_capacity < 1:
            raise ValueError("max_age, n_init and gallery_capacity must be >= 1")
        if not 0.0 <= self.iou_max_distance <= 1.0:
            raise ValueError("iou_max_distance must be in [0, 1]")


@dataclass(frozen=True)
class FrameOutput:
    """Confirmed, currently visible tracks of one frame."""

    frame_index: int
    tracks: list[tuple[int, BoundingBox]] = field(default_factory=list)


class Tracker:
    """Tracking-by-detection over one sequence, one frame at a time."""

    def __init__(self, config: TrackerConfig | None = None):
        self.config = config or TrackerConfig()
        self.kf = KalmanFilter(
            self.config.std_weight_position, self.config.std_weight_velocity
        )
        self.tracks: list[Track] = []
        self.frame_index = -1
        self._next_id = 1

    def step(self, detections: Sequence[Detection]) -> FrameOutput:
        """Advance one frame and return the confirmed visible tracks."""
        cfg = self.config
        detections = [d for d in detections if d.confidence >= cfg.min_confidence]
        if cfg.appearance_matching:
            for i, det in enumerate(detections):
                if det.descriptor is None:
                    raise ValueError(
                        f"detection {i} has no descriptor but appearance matching is on"
                    )
        self.frame_index += 1

        predicted = self.kf.predict_many([t.kalman for t in self.tracks])
        for track, state in zip(self.tracks, predicted):
            track.kalman = state
            track.age += 1
            track.time_since_update += 1

        matches, unmatched_dets = self._associate(detections)

        matched_ids = set()
        track_by_id = {t.track_id: t for t in self.tracks}
        matched_tracks = [track_by_id[tid] for tid, _ in matches]
        updated = self.kf.update_many(
            [t.kalman for t in matched_tracks],
            [detections[j].box.to_cxcywh() for _, j in matches],
        )
        for (track_id, det_index), track, state in zip(matches, matched_tracks, updated):
            det = detections[det_index]
            track.kalman = state
            if det.descriptor is not None:
                track.gallery.append(det.descriptor)
            track.hits += 1
            track.time_since_update = 0
            matched_ids.add(track_id)

        for det_index in unmatched_dets:
            self._start_track(detections[det_index])

        for track in self.tracks:
            if track.track_id in matched_ids or track.age == 1:
                # birth counts as the first association of the streak
                if track.state is TrackState.UNCONFIRMED and track.hits >= cfg.n_init:
                    track.state = TrackState.CONFIRMED
            else:
                track.hits = 0
                if track.state is TrackState.UNCONFIRMED:
                    track.state = TrackState.DELETED
                elif track.time_since_update > cfg.max_age:
                    track.state = TrackState.DELETED

        output = FrameOutput(
            self.frame_index,
            [
                (t.track_id, t.current_box())
                for t in self.tracks
                if t.is_confirmed() and t.time_since_update <= 1
            ],
        )
        self.tracks = [t for t in self.tracks if not t.is_deleted()]
        return output

    def _associate(self, detections) -> tuple[list[tuple[int, int]], list[int]]:
        cfg = self.config
        if not cfg.appearance_matching:
            result = association.iou_match(
                self.tracks,
                detections,
                max_distance=cfg.iou_max_distance,
                kf=self.kf,
                motion_threshold=cfg.motion_gate,
            )
            return result.matches, result.unmatched_detections

        confirmed = [t for t in self.tracks if t.is_confirmed()]
        cascade = association.matching_cascade(
            self.kf,
            confirmed,
            detections,
            max_age=cfg.max_age,
            motion_threshold=cfg.motion_gate,
            appearance_threshold=cfg.appearance_gate,
        )
        # unconfirmed tracks plus confirmed tracks missed exactly this frame
        fallback_tracks = [t for t in self.tracks if not t.is_confirmed()] + [
            t
            for t in confirmed
            if t.track_id in cascade.unmatched_tracks and t.time_since_update == 1
        ]
        fallback = association.iou_match(
            fallback_tracks,
            detections,
            cascade.unmatched_detections,
            max_distance=cfg.iou_max_distance,
        )
        return cascade.matches + fallback.matches, fallback.unmatched_detections

    def _start_track(self, detection: Detection) -> None:
        track = Track(
            self._next_id,
            self.kf.initiate(detection.box.to_cxcywh()),
            self.config.gallery_capacity,
        )
        if detection.descriptor is not None:
            track.gallery.append(detection.descriptor)
        self._next_id += 1
        self.tracks.append(track)

    def run(self, sequence: Iterable[tuple[int, Sequence[Detection]]]) -> list[FrameOutput]:
        """Track a whole sequence of (frame index, detections) pairs.

        Frame indices must be strictly increasing; index gaps are stepped
        through as empty frames so the motion model always advances one frame
        per step. Returns one :class:`FrameOutput` per stepped frame.
        """
        outputs: list[FrameOutput] = []
        for frame_index, detections in sequence:
            if frame_index <= self.frame_index:
                raise ValueError(
                    f"frame indices must be strictly increasing, got {frame_index} "
                    f"after {self.frame_index}"
                )
            for _ in range(self.frame_index + 1, frame_index):
                outputs.append(self.step([]))
            outputs.append(self.step(detections))
        return outputs
