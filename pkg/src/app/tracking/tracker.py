"""Online two-stage association over a frame sequence."""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import Settings
from app.models import Detection, TrackStatus
from app.tracking.assignment import Assignment, cosine_cost, hungarian, iou_cost
from app.tracking.filling import fill_trajectories
from app.tracking.motion import KalmanBoxFilter
from app.tracking.track import Track

logger = logging.getLogger(__name__)


class FrameOrderError(ValueError):
    """Frames were not given in strictly increasing order."""


@dataclass
class FrameObservation:
    frame: int
    detections: List[Detection]
    embeddings: Optional[List[np.ndarray]] = None


@dataclass
class FrameResult:
    frame: int
    matched: List[Tuple[int, int]] = field(default_factory=list)
    spawned: List[int] = field(default_factory=list)
    lost: List[int] = field(default_factory=list)
    finished: List[int] = field(default_factory=list)


class Tracker:
    """
    Holds the live and finished tracks of one sequence.

    Not safe for concurrent use; track several sequences with separate instances.
    """

    def __init__(self, config: Optional[Settings] = None):
        self.config = config or Settings()
        self.kalman = KalmanBoxFilter(noise_scale=self.config.motion_noise_scale)
        self.tracks: List[Track] = []
        self.finished: List[Track] = []
        self.next_id = 1
        self.last_frame: Optional[int] = None

    @property
    def active(self) -> List[Track]:
        return [t for t in self.tracks if t.status == TrackStatus.ACTIVE]

    @property
    def lost(self) -> List[Track]:
        return [t for t in self.tracks if t.status == TrackStatus.LOST]

    def _advance(self, frame: int) -> None:
        steps = 1 if self.last_frame is None else frame - self.last_frame
        for track in self.tracks:
            for _ in range(steps):
                track.predict()

    def _stage_embeddings(
        self,
        tracks: List[Track],
        detections: Sequence[Detection],
        embeddings: Sequence[np.ndarray],
    ) -> Assignment:
        costs = cosine_cost([t.embedding for t in tracks], embeddings)
        costs = costs.forbid(costs.values > self.config.embedding_thresh)
        if self.config.motion_gating:
            gate = np.array([
                [self.kalman.gating_distance(t.motion, d.box) > self.config.gating_sigma for d in detections]
                for t in tracks
            ], dtype=bool).reshape(len(tracks), len(detections))
            costs = costs.forbid(gate)
        return hungarian(costs)

    def _stage_iou(self, tracks: List[Track], detections: Sequence[Detection]) -> Assignment:
        costs = iou_cost([t.predicted_box for t in tracks], [d.box for d in detections], self.config.iou_match_thresh)
        return hungarian(costs)

    def associate_frame(
        self,
        frame: int,
        detections: Sequence[Detection],
        embeddings: Optional[Sequence[np.ndarray]] = None,
    ) -> FrameResult:
        """
        Match one frame's detections to the live tracks.

        Stage 1 matches on appearance (cosine cost above ``embedding_thresh`` and,
        when enabled, motion-gated pairs forbidden); stage 2 matches what is left on
        IoU with the predicted boxes. Leftover detections scoring at least
        ``init_score`` start new tracks; tracks unseen for more than ``max_lost``
        frames are finished.

        Raises:
            FrameOrderError: If ``frame`` does not come after the previous frame.
            ValueError: If embeddings and detections differ in number.
        """
        if self.last_frame is not None and frame <= self.last_frame:
            raise FrameOrderError(f"frame {frame} after frame {self.last_frame}")
        if embeddings is not None and len(embeddings) != len(detections):
            raise ValueError(f"{len(embeddings)} embeddings for {len(detections)} detections")
        self._advance(frame)
        self.last_frame = frame
        result = FrameResult(frame)

        pool = sorted(self.tracks, key=lambda t: t.id)
        remaining_dets = list(range(len(detections)))
        if embeddings is not None and pool and detections:
            with_embedding = [t for t in pool if t.embedding is not None]
            stage1 = self._stage_embeddings(with_embedding, detections, embeddings)
            for i, j in stage1.pairs:
                with_embedding[i].observe(frame, detections[j].box, embeddings[j], detections[j].score, self.config.ema_momentum)
                result.matched.append((with_embedding[i].id, j))
            matched_ids = {with_embedding[i].id for i, _ in stage1.pairs}
            pool = [t for t in pool if t.id not in matched_ids]
            remaining_dets = [j for j in remaining_dets if j not in {j for _, j in stage1.pairs}]
            logger.debug(f"frame {frame}: stage 1 matched {len(stage1.pairs)}")

        if pool and remaining_dets:
            stage2 = self._stage_iou(pool, [detections[j] for j in remaining_dets])
            matched = set()
            for i, k in stage2.pairs:
                j = remaining_dets[k]
                emb = None if embeddings is None else embeddings[j]
                pool[i].observe(frame, detections[j].box, emb, detections[j].score, self.config.ema_momentum)
                result.matched.append((pool[i].id, j))
                matched.add(i)
            remaining_dets = [remaining_dets[k] for k in stage2.unmatched_cols]
            pool = [t for i, t in enumerate(pool) if i not in matched]
            logger.debug(f"frame {frame}: stage 2 matched {len(stage2.pairs)}")

        for track in pool:
            if track.status == TrackStatus.ACTIVE:
                track.mark_lost(frame)
                result.lost.append(track.id)
            if frame - track.last_frame > self.config.max_lost:
                track.finish()
                result.finished.append(track.id)
                logger.debug(f"track {track.id} finished after frame {track.last_frame}")
        self.finished.extend(t for t in self.tracks if t.status == TrackStatus.FINISHED)
        self.tracks = [t for t in self.tracks if t.status != TrackStatus.FINISHED]

        for j in remaining_dets:
            det = detections[j]
            if det.score < self.config.init_score:
                continue
            emb = None if embeddings is None else embeddings[j]
            track = Track.spawn(self.next_id, frame, det.box, emb, det.score, self.kalman)
            self.tracks.append(track)
            result.spawned.append(track.id)
            logger.debug(f"track {track.id} spawned at frame {frame}")
            self.next_id += 1
        result.matched.sort()
        return result

    def finalize(self) -> List[Track]:
        """Finish every live track and return all tracks sorted by id."""
        for track in self.tracks:
            track.finish()
        self.finished.extend(self.tracks)
        self.tracks = []
        return sorted(self.finished, key=lambda t: t.id)


FrameInput = Union[FrameObservation, Tuple[Sequence[Detection], Optional[Sequence[np.ndarray]]]]


def track_sequence(frames: Iterable[FrameInput], config: Optional[Settings] = None) -> List[Track]:
    """
    Associate every frame in order, then fill gaps; tracks come back sorted by id.

    Plain ``(detections, embeddings)`` pairs are numbered from frame 1.
    """
    config = config or Settings()
    tracker = Tracker(config)
    for index, item in enumerate(frames, start=1):
        if isinstance(item, FrameObservation):
            tracker.associate_frame(item.frame, item.detections, item.embeddings)
        else:
            detections, embeddings = item
            tracker.associate_frame(index, detections, embeddings)
    tracks = tracker.finalize()
    if config.fill_gaps:
        tracks = fill_trajectories(tracks, config.gap_max)
    logger.info(f"Tracked {len(tracks)} trajectories over {tracker.last_frame or 0} frames")
    return tracks
