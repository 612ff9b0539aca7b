"""
Constant-velocity Kalman filter over boxes.

The state is (cx, cy, a, h, vcx, vcy, va, vh) where a = width / height. Process and
measurement noise scale with the box height (position weight 1/20, velocity 1/160).
"""
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from app.models import Box

if TYPE_CHECKING:
    from app.tracking.track import Track

logger = logging.getLogger(__name__)

STATE_DIM = 8
MEASUREMENT_DIM = 4
ASPECT_STD = 1e-2
ASPECT_MEASUREMENT_STD = 1e-1
ASPECT_VELOCITY_STD = 1e-5
# Keeps the innovation covariance invertible when the noise scale is 0.
INNOVATION_JITTER = 1e-9


class MotionStateError(ValueError):
    """A box or motion state with non-positive extent."""


@dataclass
class MotionState:
    mean: np.ndarray
    covariance: np.ndarray

    def copy(self) -> "MotionState":
        return MotionState(self.mean.copy(), self.covariance.copy())

    @property
    def box(self) -> Box:
        return state_to_box(self.mean)


def box_to_measurement(box: Box) -> np.ndarray:
    left, top, right, bottom = box
    width, height = right - left, bottom - top
    if width <= 0 or height <= 0:
        raise MotionStateError(f"box {box} has non-positive extent")
    return np.array([(left + right) / 2.0, (top + bottom) / 2.0, width / height, height])


def state_to_box(mean: np.ndarray) -> Box:
    cx, cy, aspect, height = (float(v) for v in mean[:4])
    width = aspect * height
    if width <= 0 or height <= 0:
        raise MotionStateError(f"state extent (w={width:.4g}, h={height:.4g}) is not positive")
    return (cx - width / 2.0, cy - height / 2.0, cx + width / 2.0, cy + height / 2.0)


class KalmanBoxFilter:
    """
    Linear predict/update on ``MotionState``.

    ``noise_scale`` multiplies every position-like noise term. With 0, observations are
    trusted exactly and predictions on truly linear motion are exact.
    """

    def __init__(
        self,
        noise_scale: float = 1.0,
        std_weight_position: float = 1.0 / 20,
        std_weight_velocity: float = 1.0 / 160,
    ):
        if noise_scale < 0:
            raise ValueError(f"noise scale must be >= 0, got {noise_scale}")
        self.noise_scale = noise_scale
        self.std_weight_position = std_weight_position
        self.std_weight_velocity = std_weight_velocity
        self.transition = np.eye(STATE_DIM)
        self.transition[:4, 4:] = np.eye(4)
        self.observation = np.eye(MEASUREMENT_DIM, STATE_DIM)

    def initiate(self, box: Box) -> MotionState:
        z = box_to_measurement(box)
        height = z[3]
        s = self.noise_scale
        std = np.array([
            2 * s * self.std_weight_position * height,
            2 * s * self.std_weight_position * height,
            s * ASPECT_STD,
            2 * s * self.std_weight_position * height,
            10 * self.std_weight_velocity * height,
            10 * self.std_weight_velocity * height,
            ASPECT_VELOCITY_STD,
            10 * self.std_weight_velocity * height,
        ])
        return MotionState(np.concatenate([z, np.zeros(4)]), np.diag(std ** 2))

    def predict(self, state: MotionState) -> MotionState:
        """
        Raises:
            MotionStateError: If the predicted box collapses to non-positive extent.
        """
        height = state.mean[3]
        s = self.noise_scale
        std = np.array([
            s * self.std_weight_position * height,
            s * self.std_weight_position * height,
            s * ASPECT_STD,
            s * self.std_weight_position * height,
            s * self.std_weight_velocity * height,
            s * self.std_weight_velocity * height,
            s * ASPECT_VELOCITY_STD,
            s * self.std_weight_velocity * height,
        ])
        mean = self.transition @ state.mean
        covariance = self.transition @ state.covariance @ self.transition.T + np.diag(std ** 2)
        state_to_box(mean)
        return MotionState(mean, _symmetric(covariance))

    def project(self, state: MotionState):
        """Measurement-space mean and innovation covariance."""
        height = state.mean[3]
        s = self.noise_scale
        std = np.array([
            s * self.std_weight_position * height,
            s * self.std_weight_position * height,
            s * ASPECT_MEASUREMENT_STD,
            s * self.std_weight_position * height,
        ])
        H = self.observation
        innovation_cov = H @ state.covariance @ H.T + np.diag(std ** 2) + INNOVATION_JITTER * np.eye(MEASUREMENT_DIM)
        return H @ state.mean, _symmetric(innovation_cov), np.diag(std ** 2)

    def update(self, state: MotionState, box: Box) -> MotionState:
        """Joseph-form correction with the observed box."""
        z = box_to_measurement(box)
        projected, innovation_cov, measurement_cov = self.project(state)
        H = self.observation
        gain = np.linalg.solve(innovation_cov, H @ state.covariance).T
        mean = state.mean + gain @ (z - projected)
        factor = np.eye(STATE_DIM) - gain @ H
        covariance = factor @ state.covariance @ factor.T + gain @ measurement_cov @ gain.T
        return MotionState(mean, _symmetric(covariance))

    def gating_distance(self, state: MotionState, box: Box) -> float:
        """Mahalanobis distance between the predicted and the observed box center."""
        projected, innovation_cov, _ = self.project(state)
        delta = box_to_measurement(box)[:2] - projected[:2]
        return float(np.sqrt(delta @ np.linalg.solve(innovation_cov[:2, :2], delta)))


def _symmetric(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)


def motion_predict(track: "Track") -> Box:
    """Advance the track's motion state by one frame and return the predicted box."""
    track.motion = track.kalman.predict(track.motion)
    return track.motion.box


def motion_update(track: "Track", box: Box) -> MotionState:
    track.motion = track.kalman.update(track.motion, box)
    return track.motion
