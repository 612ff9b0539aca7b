"""Online association: assignment, motion, track lifecycle and gap filling."""
from app.tracking.assignment import (
    FORBIDDEN,
    Assignment,
    CostMatrix,
    DegenerateEmbeddingError,
    cosine_cost,
    embeddings_at_centers,
    hungarian,
    iou_cost,
    iou_matrix,
)
from app.tracking.filling import fill_trajectories
from app.tracking.motion import KalmanBoxFilter, MotionState, MotionStateError, motion_predict, motion_update
from app.tracking.track import Track
from app.tracking.tracker import FrameObservation, FrameOrderError, FrameResult, Tracker, track_sequence

__all__ = [
    "FORBIDDEN",
    "Assignment",
    "CostMatrix",
    "DegenerateEmbeddingError",
    "FrameObservation",
    "FrameOrderError",
    "FrameResult",
    "KalmanBoxFilter",
    "MotionState",
    "MotionStateError",
    "Track",
    "Tracker",
    "cosine_cost",
    "embeddings_at_centers",
    "fill_trajectories",
    "hungarian",
    "iou_cost",
    "iou_matrix",
    "motion_predict",
    "motion_update",
    "track_sequence",
]
