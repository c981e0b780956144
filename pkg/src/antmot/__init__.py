"""antmot: online multi-object tracking for ant-colony video.

A tracking-by-detection engine (Kalman motion gating, appearance-gallery
cosine matching, age-prioritized matching cascade with an IoU fallback),
the numeric primitives of its two-stage detection head, CLEAR-style
evaluation metrics, and a deterministic colony simulator that stands in for
real detector and descriptor networks.
"""

from .geometry import Anchor, BoundingBox, generate_anchors, iou, iou_matrix, nms
from .detmath import RegressionTarget, ScoreMaps, detection_loss, psroi_pool, softmax, vote
from .descriptor import CosineClassifier, classifier_loss, cosine_distance, normalize
from .motion import CHI2_GATE_4DOF_95, KalmanFilter, KalmanState, motion_gate
from .association import (
    AssignmentResult,
    CostMatrix,
    Gallery,
    appearance_gate,
    combined_gate,
    gallery_distance,
    iou_match,
    matching_cascade,
    solve_assignment,
)
from .tracker import Detection, FrameOutput, Track, Tracker, TrackerConfig, TrackState
from .metrics import (
    MotAccumulator,
    SequenceScore,
    average_precision,
    evaluate_sequence,
    score,
    weighted_aggregate,
)
from .sim import MotionParams, NoiseParams, Scenario, ScenarioConfig, occlusion_filter, simulate

__version__ = "0.1.0"
