"""Linear interpolation of the frames a re-matched track missed."""
import copy
import logging
from typing import List, Sequence

from app.tracking.track import Track

logger = logging.getLogger(__name__)


def fill_trajectories(tracks: Sequence[Track], gap_max: int = 30) -> List[Track]:
    """
    Copies of ``tracks`` with internal gaps of at most ``gap_max`` missing frames filled.

    Each coordinate is interpolated linearly between the observations around the gap;
    filled frames are recorded in ``Track.filled``. Observed boxes are never touched and
    nothing is added before the first or after the last observation.
    """
    out = []
    for track in tracks:
        filled = copy.copy(track)
        filled.boxes = dict(track.boxes)
        filled.scores = dict(track.scores)
        filled.filled = set(track.filled)
        frames = track.frames
        for start, end in zip(frames, frames[1:]):
            missing = end - start - 1
            if missing == 0 or missing > gap_max:
                continue
            a, b = track.boxes[start], track.boxes[end]
            for frame in range(start + 1, end):
                w = (frame - start) / (end - start)
                filled.boxes[frame] = tuple(a[k] + w * (b[k] - a[k]) for k in range(4))
                filled.scores[frame] = min(track.scores.get(start, 1.0), track.scores.get(end, 1.0))
                filled.filled.add(frame)
            logger.debug(f"track {track.id}: filled {missing} frames between {start} and {end}")
        filled.boxes = dict(sorted(filled.boxes.items()))
        out.append(filled)
    return out
