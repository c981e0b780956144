"""Deterministic synthetic colony scenarios.

Agents follow a heading random walk (Gaussian turns, occasional abrupt turns
and pauses) inside a rectangular arena; square ground-truth boxes ride on the
agent centers. Detections are the ground truth minus Bernoulli misses, plus
Gaussian center jitter and uniformly placed false positives; descriptors are
each agent's fixed identity vector perturbed by Gaussian noise and
renormalized.

All randomness flows through one ``numpy.random.Generator`` backed by the
Philox counter-based 64-bit bit generator, keyed by the scenario seed, and is
consumed in a fixed frame-major, agent-minor order, so a (config, seed) pair
reproduces bit-identical scenarios on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .descriptor import DESCRIPTOR_DIM, normalize
from .geometry import BoundingBox
from .tracker import Detection

__all__ = [
    "MotionParams",
    "NoiseParams",
    "ScenarioConfig",
    "Scenario",
    "simulate",
    "occlusion_filter",
]


@dataclass(frozen=True)
class MotionParams:
    speed_mean: float = 3.0
    speed_std: float = 1.0
    turn_std: float = 0.3
    abrupt_turn_prob: float = 0.02
    pause_prob: float = 0.05


@dataclass(frozen=True)
class NoiseParams:
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0  # expected spurious detections per frame
    position_jitter_std: float = 0.0
    descriptor_noise_std: float = 0.0


@dataclass(frozen=True)
class ScenarioConfig:
    arena_width: float = 1280.0
    arena_height: float = 720.0
    n_agents: int = 10
    frames: int = 100
    box_size: float = 96.0
    motion: MotionParams = field(default_factory=MotionParams)
    entry_exit_enabled: bool = False
    noise: NoiseParams = field(default_factory=NoiseParams)
    seed: int = 0
    descriptor_dim: int = DESCRIPTOR_DIM

    def __post_init__(self) -> None:
        if self.arena_width <= 0 or self.arena_height <= 0 or self.box_size <= 0:
            raise ValueError("arena dimensions and box size must be positive")
        if self.frames < 0 or self.n_agents < 0:
            raise ValueError("frames and n_agents must be non-negative")
        if self.n_agents == 0 and not self.entry_exit_enabled:
            raise ValueError("need at least one agent unless entry/exit is enabled")
        for p in (
            self.motion.abrupt_turn_prob,
            self.motion.pause_prob,
            self.noise.miss_prob,
        ):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probabilities must be in [0, 1], got {p!r}")


@dataclass(eq=False)
class Scenario:
    """Ground truth plus the noise-corrupted observations derived from it.

    ``gt[t]`` lists (agent id, box) for every agent visible in frame t;
    ``detections[t]`` the corresponding observations, and
    ``detection_sources[t]`` the agent id each detection came from (None for
    false positives).
    """

    gt: list[list[tuple[int, BoundingBox]]]
    detections: list[list[Detection]]
    detection_sources: list[list[int | None]]
    identity_descriptors: np.ndarray


def _clamp_center(value: float, half_box: float, limit: float) -> float:
    return min(max(value, half_box), limit - half_box)


def simulate(config: ScenarioConfig) -> Scenario:
    """Generate a scenario; identical configs yield bit-identical output."""
    rng = np.random.Generator(np.random.Philox(key=config.seed))
    n = config.n_agents
    dim = config.descriptor_dim
    w, h = config.arena_width, config.arena_height
    half = config.box_size / 2.0
    m, noise = config.motion, config.noise

    identities = rng.normal(size=(n, dim))
    identities /= np.linalg.norm(identities, axis=1, keepdims=True)

    pos = np.column_stack(
        [
            rng.uniform(min(half, w / 2), max(w - half, w / 2), size=n),
            rng.uniform(min(half, h / 2), max(h - half, h / 2), size=n),
        ]
    ) if n else np.zeros((0, 2))
    heading = rng.uniform(0.0, 2.0 * math.pi, size=n)
    active = np.ones(n, dtype=bool)
    reentry_delay = np.zeros(n, dtype=int)

    gt: list[list[tuple[int, BoundingBox]]] = []
    detections: list[list[Detection]] = []
    sources: list[list[int | None]] = []

    for _ in range(config.frames):
        for a in range(n):
            if not active[a]:
                reentry_delay[a] -= 1
                if reentry_delay[a] <= 0:
                    pos[a] = _reentry_point(rng, w, h)
                    heading[a] = _inward_heading(rng, pos[a], w, h)
                    active[a] = True
                continue
            speed = 0.0 if rng.random() < m.pause_prob else max(
                0.0, rng.normal(m.speed_mean, m.speed_std)
            )
            if rng.random() < m.abrupt_turn_prob:
                heading[a] += rng.uniform(-math.pi, math.pi)
            else:
                heading[a] += rng.normal(0.0, m.turn_std)
            pos[a, 0] += speed * math.cos(heading[a])
            pos[a, 1] += speed * math.sin(heading[a])
            if config.entry_exit_enabled:
                if not (0.0 <= pos[a, 0] <= w and 0.0 <= pos[a, 1] <= h):
                    active[a] = False
                    reentry_delay[a] = 5 + int(rng.geometric(0.1))
            else:
                if pos[a, 0] < half or pos[a, 0] > w - half:
                    heading[a] = math.pi - heading[a]
                if pos[a, 1] < half or pos[a, 1] > h - half:
                    heading[a] = -heading[a]
                pos[a, 0] = _clamp_center(pos[a, 0], half, w)
                pos[a, 1] = _clamp_center(pos[a, 1], half, h)

        frame_gt: list[tuple[int, BoundingBox]] = []
        frame_dets: list[Detection] = []
        frame_sources: list[int | None] = []
        for a in range(n):
            if not active[a]:
                continue
            cx = _clamp_center(pos[a, 0], half, w)
            cy = _clamp_center(pos[a, 1], half, h)
            box = BoundingBox.from_cxcywh(cx, cy, config.box_size, config.box_size)
            frame_gt.append((a, box))
            if rng.random() < noise.miss_prob:
                continue
            jitter = rng.normal(0.0, noise.position_jitter_std, size=2)
            det_box = BoundingBox.from_cxcywh(
                cx + jitter[0], cy + jitter[1], config.box_size, config.box_size
            )
            descriptor = normalize(
                identities[a] + rng.normal(0.0, noise.descriptor_noise_std, size=dim)
            )
            frame_dets.append(Detection(det_box, 1.0, descriptor))
            frame_sources.append(a)
        for _ in range(rng.poisson(noise.false_positive_rate)):
            cx = rng.uniform(min(half, w / 2), max(w - half, w / 2))
            cy = rng.uniform(min(half, h / 2), max(h - half, h / 2))
            box = BoundingBox.from_cxcywh(cx, cy, config.box_size, config.box_size)
            confidence = rng.uniform(0.3, 0.9)
            descriptor = normalize(rng.normal(size=dim))
            frame_dets.append(Detection(box, confidence, descriptor))
            frame_sources.append(None)
        gt.append(frame_gt)
        detections.append(frame_dets)
        sources.append(frame_sources)

    return Scenario(gt, detections, sources, identities)


def _reentry_point(rng: np.random.Generator, w: float, h: float) -> np.ndarray:
    edge = int(rng.integers(4))
    u = rng.random()
    if edge == 0:
        return np.array([u * w, 1.0])
    if edge == 1:
        return np.array([u * w, h - 1.0])
    if edge == 2:
        return np.array([1.0, u * h])
    return np.array([w - 1.0, u * h])


def _inward_heading(rng: np.random.Generator, point: np.ndarray, w: float, h: float) -> float:
    toward_center = math.atan2(h / 2 - point[1], w / 2 - point[0])
    return toward_center + rng.uniform(-math.pi / 4, math.pi / 4)


def occlusion_filter(scenario: Scenario, merge_distance: float) -> Scenario:
    """Drop detections of close agent pairs, one per pair per frame.

    Whenever two ground-truth centers in a frame are strictly closer than
    ``merge_distance``, the detection of the pair's higher agent id is
    dropped for that frame (deterministically). False positives are kept.
    """
    if merge_distance < 0:
        raise ValueError(f"merge_distance must be >= 0, got {merge_distance!r}")
    new_dets: list[list[Detection]] = []
    new_sources: list[list[int | None]] = []
    for frame_gt, frame_dets, frame_sources in zip(
        scenario.gt, scenario.detections, scenario.detection_sources
    ):
        dropped: set[int] = set()
        for i in range(len(frame_gt)):
            for j in range(i + 1, len(frame_gt)):
                (id_a, box_a), (id_b, box_b) = frame_gt[i], frame_gt[j]
                dist = math.dist(box_a.center, box_b.center)
                if dist < merge_distance:
                    dropped.add(max(id_a, id_b))
        kept = [
            (d, s)
            for d, s in zip(frame_dets, frame_sources)
            if s is None or s not in dropped
        ]
        new_dets.append([d for d, _ in kept])
        new_sources.append([s for _, s in kept])
    return Scenario(
        scenario.gt, new_dets, new_sources, scenario.identity_descriptors
    )
