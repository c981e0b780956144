"""Constant-velocity Kalman filter over box state and the motion gate.

The state is the 8-vector (cx, cy, w, h, vcx, vcy, vw, vh); the first four
components are observed directly. All operations are pure: they take a
:class:`KalmanState` and return a new one, so instances of
:class:`KalmanFilter` (which only hold the model matrices and noise weights)
are safe to share.

Process and measurement noise scale with the box height, following the usual
size-relative convention for box trackers: position-like standard deviations
default to h/20 and velocity-like ones to h/160.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "CHI2_GATE_4DOF_95",
    "KalmanState",
    "KalmanFilter",
    "motion_gate",
]

# 0.95 quantile of the chi-square distribution with 4 degrees of freedom,
# matching the 4-d measurement; the default motion gate threshold.
CHI2_GATE_4DOF_95 = 9.487729036781154


@dataclass(frozen=True)
class KalmanState:
    """Gaussian box state: 8-d mean and 8x8 covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        if mean.shape != (8,) or cov.shape != (8, 8):
            raise ValueError(
                f"expected (8,) mean and (8, 8) covariance, got {mean.shape} and {cov.shape}"
            )

    def box_mean(self) -> np.ndarray:
        """The (cx, cy, w, h) part of the mean."""
        return self.mean[:4].copy()


def _as_measurement(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (4,):
        raise ValueError(f"measurement must be a (cx, cy, w, h) 4-vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise ValueError("measurement components must be finite")
    if z[2] <= 0 or z[3] <= 0:
        raise ValueError(f"measurement width and height must be positive, got {z[2]}, {z[3]}")
    return z


class KalmanFilter:
    """Constant-velocity filter for (cx, cy, w, h) box measurements."""

    def __init__(
        self,
        std_weight_position: float = 1.0 / 20,
        std_weight_velocity: float = 1.0 / 160,
    ):
        ndim, dt = 4, 1.0
        self._motion_mat = np.eye(2 * ndim)
        for i in range(ndim):
            self._motion_mat[i, ndim + i] = dt
        self._update_mat = np.eye(ndim, 2 * ndim)
        self._std_weight_position = std_weight_position
        self._std_weight_velocity = std_weight_velocity

    def initiate(self, measurement) -> KalmanState:
        """New state centered on a measurement with zero velocity.

        The diagonal covariance uses inflated position stds (2x) and broad
        velocity stds (10x the velocity weight), both relative to box height.
        """
        z = _as_measurement(measurement)
        mean = np.concatenate([z, np.zeros(4)])
        h = z[3]
        std = np.array(
            [2 * self._std_weight_position * h] * 4
            + [10 * self._std_weight_velocity * h] * 4
        )
        return KalmanState(mean, np.diag(std**2))

    def _motion_cov(self, h: float) -> np.ndarray:
        q = np.zeros((8, 8))
        np.fill_diagonal(
            q[:4, :4], (self._std_weight_position * h) ** 2
        )
        np.fill_diagonal(
            q[4:, 4:], (self._std_weight_velocity * h) ** 2
        )
        return q

    def predict(self, state: KalmanState) -> KalmanState:
        """One time step: position += velocity, covariance grows by Q."""
        q = self._motion_cov(state.mean[3])
        mean = self._motion_mat @ state.mean
        cov = self._motion_mat @ state.covariance @ self._motion_mat.T + q
        return KalmanState(mean, cov)

    def project(self, state: KalmanState) -> tuple[np.ndarray, np.ndarray]:
        """Measurement-space mean and innovation covariance S = HPH' + R.

        The observation matrix picks out the first four state components, so
        the products reduce to slicing.
        """
        s = state.covariance[:4, :4].copy()
        s[range(4), range(4)] += (self._std_weight_position * state.mean[3]) ** 2
        return state.mean[:4], s

    def update(self, state: KalmanState, measurement) -> KalmanState:
        """Condition the state on a measurement.

        The gain is obtained by solving against the factored innovation
        covariance (LU with partial pivoting), never by inverting it.
        """
        z = _as_measurement(measurement)
        proj_mean, s = self.project(state)
        gain = np.linalg.solve(s, state.covariance[:4, :]).T
        mean = state.mean + gain @ (z - proj_mean)
        cov = state.covariance - gain @ s @ gain.T
        cov = 0.5 * (cov + cov.T)
        return KalmanState(mean, cov)

    def mahalanobis_sq(self, state: KalmanState, measurements) -> np.ndarray | float:
        """Squared Mahalanobis distance from the projected state.

        Accepts a single (4,) measurement or an (N, 4) batch. The innovation
        covariance is factored and solved against, never explicitly
        inverted; ``numpy.linalg.LinAlgError`` signals a singular covariance.
        """
        z = np.atleast_2d(np.asarray(measurements, dtype=float))
        if z.shape[1] != 4:
            raise ValueError(f"measurements must be (N, 4), got shape {z.shape}")
        proj_mean, s = self.project(state)
        diff = z - proj_mean
        y = np.linalg.solve(s, diff.T)
        d = np.sum(diff.T * y, axis=0)
        return d if np.asarray(measurements).ndim == 2 else float(d[0])

    def gating_distances(self, states, measurements) -> np.ndarray:
        """Squared Mahalanobis distances for many states at once, (T, N).

        Equivalent to stacking :meth:`mahalanobis_sq` rows but solved in one
        batched call; used by the association hot path.
        """
        z = np.asarray(measurements, dtype=float)
        means = np.array([s.mean[:4] for s in states])
        covs = np.array([s.covariance[:4, :4] for s in states])
        covs[:, range(4), range(4)] += (
            self._std_weight_position * means[:, 3, None]
        ) ** 2
        diff = (z[None, :, :] - means[:, None, :]).transpose(0, 2, 1)  # (T, 4, N)
        y = np.linalg.solve(covs, diff)
        return np.sum(diff * y, axis=1)

    def predict_many(self, states) -> list[KalmanState]:
        """Batched :meth:`predict` over a list of states (same results)."""
        if not states:
            return []
        means = np.array([s.mean for s in states])
        covs = np.array([s.covariance for s in states])
        h = means[:, 3]
        q = np.zeros((len(states), 8, 8))
        q[:, range(4), range(4)] = ((self._std_weight_position * h) ** 2)[:, None]
        q[:, range(4, 8), range(4, 8)] = ((self._std_weight_velocity * h) ** 2)[:, None]
        new_means = means @ self._motion_mat.T
        new_covs = self._motion_mat @ covs @ self._motion_mat.T + q
        return [KalmanState(m, c) for m, c in zip(new_means, new_covs)]

    def update_many(self, states, measurements) -> list[KalmanState]:
        """Batched :meth:`update` over aligned states and measurements."""
        if not states:
            return []
        z = np.array([_as_measurement(m) for m in measurements])
        means = np.array([s.mean for s in states])
        covs = np.array([s.covariance for s in states])
        s_mat = covs[:, :4, :4].copy()
        s_mat[:, range(4), range(4)] += (
            (self._std_weight_position * means[:, 3]) ** 2
        )[:, None]
        gains = np.linalg.solve(s_mat, covs[:, :4, :]).transpose(0, 2, 1)
        innovation = z - means[:, :4]
        new_means = means + (gains @ innovation[:, :, None])[:, :, 0]
        new_covs = covs - gains @ s_mat @ gains.transpose(0, 2, 1)
        new_covs = 0.5 * (new_covs + new_covs.transpose(0, 2, 1))
        return [KalmanState(m, c) for m, c in zip(new_means, new_covs)]


def motion_gate(d1, threshold: float = CHI2_GATE_4DOF_95):
    """1 where the squared motion distance is strictly below the threshold.

    Works elementwise on arrays; the boundary value itself does not pass.
    """
    return np.asarray(d1) < threshold if np.ndim(d1) else bool(d1 < threshold)
