"""Track several sequences concurrently, one Tracker per sequence."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from app.config import Settings
from app.tracking.assignment import DegenerateEmbeddingError
from app.tracking.motion import MotionStateError
from app.tracking.track import Track
from app.tracking.tracker import FrameInput, FrameOrderError, track_sequence

logger = logging.getLogger(__name__)


@dataclass
class SequenceJob:
    name: str
    frames: Sequence[FrameInput]
    config: Optional[Settings] = None


@dataclass
class SequenceResult:
    name: str
    success: bool
    tracks: List[Track] = field(default_factory=list)
    error_code: Optional[str] = None
    error_message: Optional[str] = None
    seconds: float = 0.0


class SequenceRunner:
    """
    Fans sequences out to a thread pool.

    Results come back in job order regardless of completion order.
    """

    def __init__(self, workers: int = 1, config: Optional[Settings] = None):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.config = config or Settings()

    def process(self, job: SequenceJob) -> SequenceResult:
        """
        Track one sequence.

        Returns:
            SequenceResult with ``success`` False and an error code when tracking failed.
        """
        start = time.perf_counter()
        logger.info(f"Tracking sequence {job.name}: {len(job.frames)} frames")
        try:
            tracks = track_sequence(job.frames, job.config or self.config)
        except FrameOrderError as e:
            logger.error(f"Sequence {job.name} has out-of-order frames: {e}")
            return SequenceResult(job.name, False, error_code="FRAME_ORDER", error_message=str(e))
        except DegenerateEmbeddingError as e:
            logger.error(f"Sequence {job.name} has a degenerate embedding: {e}")
            return SequenceResult(job.name, False, error_code="DEGENERATE_EMBEDDING", error_message=str(e))
        except MotionStateError as e:
            logger.error(f"Sequence {job.name} has an invalid box: {e}")
            return SequenceResult(job.name, False, error_code="INVALID_BOX", error_message=str(e))
        seconds = time.perf_counter() - start
        logger.info(f"Sequence {job.name} done: {len(tracks)} tracks in {seconds:.2f}s")
        return SequenceResult(job.name, True, tracks=tracks, seconds=seconds)

    def run(self, jobs: Sequence[SequenceJob]) -> List[SequenceResult]:
        if self.workers == 1 or len(jobs) <= 1:
            return [self.process(job) for job in jobs]
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            return list(pool.map(self.process, jobs))
