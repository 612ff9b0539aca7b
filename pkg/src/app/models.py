"""Domain value types shared by detection, tracking, evaluation and I/O."""
from enum import Enum
from typing import Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Box = Tuple[float, float, float, float]


class TrackStatus(str, Enum):
    """Track lifecycle enumeration."""
    ACTIVE = "active"
    LOST = "lost"
    FINISHED = "finished"


def box_is_valid(box: Box) -> bool:
    left, top, right, bottom = box
    return right > left and bottom > top


class BoxAnnotation(BaseModel):
    """Ground-truth box in pixel coordinates with its identity label."""
    model_config = ConfigDict(frozen=True)

    l: float
    t: float
    r: float
    b: float
    identity: int = 0

    @model_validator(mode="after")
    def check_extent(self) -> "BoxAnnotation":
        if not (self.r > self.l and self.b > self.t):
            raise ValueError(f"degenerate box ({self.l}, {self.t}, {self.r}, {self.b})")
        return self

    @property
    def box(self) -> Box:
        return (self.l, self.t, self.r, self.b)

    @property
    def center(self) -> Tuple[float, float]:
        return ((self.l + self.r) / 2.0, (self.t + self.b) / 2.0)


class Detection(BaseModel):
    """One decoded target; ``center`` is its (x, y) cell on the stride-4 grid."""
    model_config = ConfigDict(frozen=True)

    box: Box
    score: float = Field(..., ge=0.0, le=1.0)
    center: Tuple[int, int] = (0, 0)

    @field_validator("box")
    @classmethod
    def validate_box(cls, v: Box) -> Box:
        if not box_is_valid(v):
            raise ValueError(f"degenerate box {v}")
        return v


class MotLine(BaseModel):
    """One row of a MOTChallenge text file."""
    model_config = ConfigDict(frozen=True)

    frame: int = Field(..., ge=1)
    id: int = -1
    bb_left: float
    bb_top: float
    bb_width: float
    bb_height: float
    conf: float = 1.0
    x: float = -1.0
    y: float = -1.0
    z: float = -1.0

    @property
    def box(self) -> Box:
        return (self.bb_left, self.bb_top, self.bb_left + self.bb_width, self.bb_top + self.bb_height)

    @classmethod
    def from_box(cls, frame: int, identity: int, box: Box, conf: float = 1.0) -> "MotLine":
        return cls(
            frame=frame,
            id=identity,
            bb_left=box[0],
            bb_top=box[1],
            bb_width=box[2] - box[0],
            bb_height=box[3] - box[1],
            conf=conf,
        )


class SyntheticScenario(BaseModel):
    """Desk-scale tracking scenario; fully determined by its fields."""
    seed: int = 0
    n_identities: int = Field(1, ge=1)
    n_frames: int = Field(50, ge=1)
    width: int = Field(1920, ge=16)
    height: int = Field(1080, ge=16)
    motion: Literal["linear", "crossing"] = "linear"
    dropout: float = Field(0.0, ge=0.0, lt=1.0)
    embedding_noise: float = Field(0.0, ge=0.0)
    embedding_dim: int = Field(64, ge=1)
    orthogonal: bool = True
    box_size: Optional[Tuple[float, float]] = None


class MetricsReport(BaseModel):
    """Sequence-level CLEAR-MOT, identity and coverage scores."""
    mota: float
    motp: float
    idf1: float = Field(..., ge=0.0, le=1.0)
    fp: int = Field(..., ge=0)
    fn: int = Field(..., ge=0)
    ids: int = Field(..., ge=0)
    mt: float = Field(..., ge=0.0, le=1.0)
    ml: float = Field(..., ge=0.0, le=1.0)
    gt_count: int = Field(..., ge=0)
    tp: int = Field(0, ge=0)
    num_predictions: int = Field(0, ge=0)
    idtp: int = Field(0, ge=0)
    idfp: int = Field(0, ge=0)
    idfn: int = Field(0, ge=0)

    @field_validator("mota")
    @classmethod
    def validate_mota(cls, v: float) -> float:
        if v > 1.0 + 1e-12:
            raise ValueError(f"MOTA cannot exceed 1, got {v}")
        return v
