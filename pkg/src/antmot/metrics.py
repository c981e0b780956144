"""CLEAR-style tracking evaluation and detection average precision.

Per frame, ground-truth boxes are put in correspondence with hypothesis
boxes: pairings from the previous frame persist while their IoU stays at or
above the threshold, the remainder is matched by minimum-cost assignment on
1 - IoU, and the outcome is logged as matches, misses, false positives and
identity switches. Tracking accuracy is
``MOTA = 1 - (FP + FN + IDS) / labeled_samples`` with ``labeled_samples``
the total number of ground-truth boxes; tracking precision is the mean IoU
over all matches. Multi-sequence aggregates weight each sequence by its
share of frames.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .association import AssignmentResult, CostMatrix, solve_assignment
from .geometry import BoundingBox, iou, iou_matrix

__all__ = [
    "MotAccumulator",
    "SequenceScore",
    "AggregateScore",
    "evaluate_sequence",
    "score",
    "weighted_aggregate",
    "frame_weighted_mean",
    "average_precision",
]

MATCH_IOU_DEFAULT = 0.5
_SENTINEL = 1e5


@dataclass
class FrameEvents:
    """What happened on one frame: matched id pairs with IoU, and leftovers."""

    frame: int
    matches: list[tuple[int, int, float]] = field(default_factory=list)
    misses: list[int] = field(default_factory=list)
    false_positives: list[int] = field(default_factory=list)
    switches: list[tuple[int, int, int]] = field(default_factory=list)  # gt, old hyp, new hyp


class MotAccumulator:
    """Event log and running totals for one evaluated sequence."""

    def __init__(self):
        self.events: list[FrameEvents] = []
        self.fp = 0
        self.fn = 0
        self.ids = 0
        self.fm = 0
        self.matches = 0
        self.iou_sum = 0.0
        self.labeled_samples = 0
        self.frames = 0
        # last hypothesis ever matched to each gt id (persists across gaps)
        self._last_hyp: dict[int, int] = {}
        # pairings of the immediately preceding frame
        self._prev_pairs: dict[int, int] = {}
        # whether each gt id was tracked at its latest appearance
        self._covered: dict[int, bool] = {}

    def update(self, frame: int, gt, hyp, iou_threshold: float) -> FrameEvents:
        """Log one frame of (id, box) ground truth against hypotheses."""
        gt_ids = [g[0] for g in gt]
        hyp_ids = [h[0] for h in hyp]
        if len(set(gt_ids)) != len(gt_ids):
            raise ValueError(f"duplicate ground-truth ids in frame {frame}")
        if len(set(hyp_ids)) != len(hyp_ids):
            raise ValueError(f"duplicate hypothesis ids in frame {frame}")
        gt_boxes = {g[0]: g[1] for g in gt}
        hyp_boxes = {h[0]: h[1] for h in hyp}

        events = FrameEvents(frame)
        paired_gt: dict[int, int] = {}
        # keep still-valid pairings from the previous frame
        for gid, hid in self._prev_pairs.items():
            if gid in gt_boxes and hid in hyp_boxes:
                overlap = iou(gt_boxes[gid], hyp_boxes[hid])
                if overlap >= iou_threshold:
                    paired_gt[gid] = hid
                    events.matches.append((gid, hid, overlap))

        free_gt = [g for g in gt_ids if g not in paired_gt]
        used_hyp = set(paired_gt.values())
        free_hyp = [h for h in hyp_ids if h not in used_hyp]
        if free_gt and free_hyp:
            overlaps = iou_matrix(
                [gt_boxes[g] for g in free_gt], [hyp_boxes[h] for h in free_hyp]
            )
            costs = np.where(overlaps >= iou_threshold, 1.0 - overlaps, _SENTINEL)
            result = solve_assignment(CostMatrix(costs, free_gt, free_hyp, _SENTINEL))
            for gid, hid in result.matches:
                overlap = overlaps[free_gt.index(gid), free_hyp.index(hid)]
                paired_gt[gid] = hid
                events.matches.append((gid, hid, float(overlap)))
                previous = self._last_hyp.get(gid)
                if previous is not None and previous != hid:
                    events.switches.append((gid, previous, hid))

        for gid in gt_ids:
            if gid in paired_gt:
                self._last_hyp[gid] = paired_gt[gid]
                self._covered[gid] = True
            else:
                events.misses.append(gid)
                if self._covered.get(gid, False):
                    self.fm += 1  # tracked -> untracked transition
                self._covered[gid] = False
        events.false_positives = [h for h in hyp_ids if h not in paired_gt.values()]

        self.frames += 1
        self.labeled_samples += len(gt_ids)
        self.matches += len(events.matches)
        self.iou_sum += sum(m[2] for m in events.matches)
        self.fn += len(events.misses)
        self.fp += len(events.false_positives)
        self.ids += len(events.switches)
        self._prev_pairs = paired_gt
        self.events.append(events)

        assert len(events.matches) + len(events.misses) == len(gt_ids)
        assert len(events.matches) + len(events.false_positives) == len(hyp_ids)
        return events


@dataclass(frozen=True)
class SequenceScore:
    fp: int
    fn: int
    ids: int
    fm: int
    mota: float
    motp: float
    frames: int
    labeled_samples: int


@dataclass(frozen=True)
class AggregateScore:
    mmota: float
    mmotp: float
    fp: int
    fn: int
    ids: int
    fm: int
    frames: int
    labeled_samples: int


def _frames_view(data):
    """Accept either {frame: items} or a dense per-frame sequence."""
    if isinstance(data, Mapping):
        return dict(data)
    return dict(enumerate(data))


def evaluate_sequence(gt, hyp, iou_threshold: float = MATCH_IOU_DEFAULT) -> MotAccumulator:
    """Accumulate CLEAR events over a whole sequence.

    ``gt`` and ``hyp`` map frame index to a list of (id, box) pairs (a plain
    per-frame list works too). Frames are visited in sorted order over the
    union of both sides.
    """
    gt = _frames_view(gt)
    hyp = _frames_view(hyp)
    acc = MotAccumulator()
    for frame in sorted(set(gt) | set(hyp)):
        acc.update(frame, gt.get(frame, []), hyp.get(frame, []), iou_threshold)
    return acc


def score(acc: MotAccumulator) -> SequenceScore:
    """Reduce an accumulator to the sequence-level numbers."""
    if acc.labeled_samples == 0:
        raise ValueError("cannot score a sequence without labeled samples")
    mota = 1.0 - (acc.fp + acc.fn + acc.ids) / acc.labeled_samples
    motp = acc.iou_sum / acc.matches if acc.matches else 0.0
    return SequenceScore(
        fp=acc.fp,
        fn=acc.fn,
        ids=acc.ids,
        fm=acc.fm,
        mota=mota,
        motp=motp,
        frames=acc.frames,
        labeled_samples=acc.labeled_samples,
    )


def frame_weighted_mean(values, frame_counts) -> float:
    """Mean of per-video values weighted by each video's share of frames."""
    values = np.asarray(values, dtype=float)
    frames = np.asarray(frame_counts, dtype=float)
    if values.shape != frames.shape or values.size == 0:
        raise ValueError("need one frame count per value")
    return float((values * frames).sum() / frames.sum())


def weighted_aggregate(scores) -> AggregateScore:
    """Frame-weighted means of MOTA and MOTP plus summed event counts."""
    scores = list(scores)
    if not scores:
        raise ValueError("need at least one sequence score")
    frames = [s.frames for s in scores]
    return AggregateScore(
        mmota=frame_weighted_mean([s.mota for s in scores], frames),
        mmotp=frame_weighted_mean([s.motp for s in scores], frames),
        fp=sum(s.fp for s in scores),
        fn=sum(s.fn for s in scores),
        ids=sum(s.ids for s in scores),
        fm=sum(s.fm for s in scores),
        frames=sum(frames),
        labeled_samples=sum(s.labeled_samples for s in scores),
    )


def average_precision(detections, gt, iou_threshold: float = MATCH_IOU_DEFAULT) -> float:
    """Detection AP at one IoU threshold with all-point interpolation.

    ``detections`` maps frame index to (score, box) pairs and ``gt`` maps
    frame index to box lists. Detections are visited in descending score
    order (ties broken by frame then input position); each claims at most
    one still-free ground-truth box of its frame, the one of highest IoU,
    and counts as a true positive when that IoU reaches the threshold.
    """
    detections = _frames_view(detections)
    gt = _frames_view(gt)
    flat: list[tuple[float, int, int, BoundingBox]] = []
    for frame in sorted(detections):
        for position, (det_score, box) in enumerate(detections[frame]):
            flat.append((float(det_score), frame, position, box))
    total_gt = sum(len(boxes) for boxes in gt.values())
    if total_gt == 0:
        return 1.0 if not flat else 0.0
    if not flat:
        return 0.0
    flat.sort(key=lambda item: (-item[0], item[1], item[2]))
    taken: dict[int, set[int]] = {frame: set() for frame in gt}
    tp = np.zeros(len(flat))
    for rank, (_, frame, _, box) in enumerate(flat):
        candidates = gt.get(frame, [])
        best, best_iou = -1, 0.0
        for g_index, g_box in enumerate(candidates):
            if g_index in taken.get(frame, set()):
                continue
            overlap = iou(box, g_box)
            if overlap > best_iou:
                best, best_iou = g_index, overlap
        if best >= 0 and best_iou >= iou_threshold:
            tp[rank] = 1.0
            taken[frame].add(best)
    cum_tp = np.cumsum(tp)
    recall = cum_tp / total_gt
    precision = cum_tp / np.arange(1, len(flat) + 1)
    # all-point interpolation: running maximum of precision from the right
    interp = np.maximum.accumulate(precision[::-1])[::-1]
    padded_recall = np.concatenate([[0.0], recall])
    return float(np.sum((padded_recall[1:] - padded_recall[:-1]) * interp))
