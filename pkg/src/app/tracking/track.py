"""Track state: box history, smoothed appearance and motion."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np

from app.models import Box, TrackStatus
from app.tracking.assignment import normalize
from app.tracking.motion import KalmanBoxFilter, MotionState, MotionStateError, motion_predict, motion_update

logger = logging.getLogger(__name__)


@dataclass
class Track:
    id: int
    kalman: KalmanBoxFilter
    motion: MotionState
    embedding: Optional[np.ndarray] = None
    boxes: Dict[int, Box] = field(default_factory=dict)
    scores: Dict[int, float] = field(default_factory=dict)
    filled: Set[int] = field(default_factory=set)
    status: TrackStatus = TrackStatus.ACTIVE
    lost_since: Optional[int] = None
    last_frame: int = 0

    @classmethod
    def spawn(
        cls,
        track_id: int,
        frame: int,
        box: Box,
        embedding: Optional[np.ndarray],
        score: float,
        kalman: KalmanBoxFilter,
    ) -> "Track":
        track = cls(
            id=track_id,
            kalman=kalman,
            motion=kalman.initiate(box),
            embedding=None if embedding is None else normalize(embedding),
        )
        track.boxes[frame] = tuple(float(v) for v in box)
        track.scores[frame] = float(score)
        track.last_frame = frame
        return track

    @property
    def frames(self) -> List[int]:
        return sorted(self.boxes)

    @property
    def first_frame(self) -> int:
        return min(self.boxes)

    @property
    def predicted_box(self) -> Box:
        return self.motion.box

    def predict(self) -> Box:
        """One constant-velocity step; a collapsing prediction freezes the track in place."""
        try:
            return motion_predict(self)
        except MotionStateError:
            logger.debug(f"track {self.id}: motion collapsed, dropping velocity")
            self.motion.mean[4:] = 0.0
            return self.motion.box

    def observe(
        self,
        frame: int,
        box: Box,
        embedding: Optional[np.ndarray],
        score: float,
        momentum: float = 0.9,
    ) -> None:
        """Record a matched detection, correct the motion state and smooth the embedding."""
        if frame <= self.last_frame:
            raise ValueError(f"track {self.id}: frame {frame} does not follow {self.last_frame}")
        motion_update(self, box)
        if embedding is not None:
            embedding = normalize(embedding)
            if self.embedding is None:
                self.embedding = embedding
            else:
                self.embedding = normalize(momentum * self.embedding + (1.0 - momentum) * embedding)
        self.boxes[frame] = tuple(float(v) for v in box)
        self.scores[frame] = float(score)
        self.last_frame = frame
        self.status = TrackStatus.ACTIVE
        self.lost_since = None

    def mark_lost(self, frame: int) -> None:
        if self.status == TrackStatus.ACTIVE:
            self.status = TrackStatus.LOST
            self.lost_since = frame
            logger.debug(f"track {self.id} lost at frame {frame}")

    def finish(self) -> None:
        self.status = TrackStatus.FINISHED
