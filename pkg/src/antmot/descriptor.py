"""Appearance descriptor algebra.

Descriptors are unit-norm vectors (128-d by default) compared by cosine
distance. The scaled-softmax cosine classifier lives here as well; it is the
training-time counterpart of the gallery matching used during tracking.
Descriptors themselves are inputs, produced by the simulator or read from
embedding files, never learned here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DESCRIPTOR_DIM",
    "normalize",
    "is_unit",
    "CosineClassifier",
    "classifier_loss",
    "cosine_distance",
]

DESCRIPTOR_DIM = 128
UNIT_NORM_TOL = 1e-6
PROB_FLOOR = 1e-12


def normalize(v) -> np.ndarray:
    """Scale a raw vector to unit L2 norm. Raises on the zero vector."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


def is_unit(v, tol: float = UNIT_NORM_TOL) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def cosine_distance(a, b) -> float:
    """1 minus the inner product of two unit-norm descriptors, in [0, 2]."""
    return 1.0 - float(np.dot(a, b))


@dataclass(frozen=True)
class CosineClassifier:
    """Scaled-softmax classifier over unit-norm class weight vectors.

    Class scores are kappa times the cosine similarity between the input
    descriptor and each weight row, pushed through softmax. kappa sharpens
    the distribution without changing the ranking of classes.
    """

    weights: np.ndarray  # (C, D), unit-norm rows
    kappa: float = 10.0

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        if weights.ndim != 2:
            raise ValueError(f"weights must be a (C, D) matrix, got shape {weights.shape}")
        norms = np.linalg.norm(weights, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise ValueError("classifier weight rows must be unit-norm")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    def classify(self, r) -> np.ndarray:
        """Class probabilities for one unit-norm descriptor."""
        r = np.asarray(r, dtype=float)
        if r.shape != (self.weights.shape[1],):
            raise ValueError(
                f"descriptor dimension {r.shape} does not match weights "
                f"({self.weights.shape[1]},)"
            )
        logits = self.kappa * (self.weights @ r)
        shifted = np.exp(logits - logits.max())
        return shifted / shifted.sum()


def classifier_loss(predictions, labels) -> float:
    """Summed cross-entropy of predicted distributions against true labels."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=int)
    if predictions.ndim != 2 or predictions.shape[0] != labels.shape[0]:
        raise ValueError("need one prediction row per label")
    if np.any(predictions < 0) or np.any(np.abs(predictions.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("each prediction must be a probability distribution")
    picked = predictions[np.arange(labels.shape[0]), labels]
    if np.any(picked < PROB_FLOOR):
        warnings.warn(
            f"true-class probabilities clamped to {PROB_FLOOR:g}",
            RuntimeWarning,
            stacklevel=2,
        )
        picked = np.maximum(picked, PROB_FLOOR)
    return float(-np.log(picked).sum())
