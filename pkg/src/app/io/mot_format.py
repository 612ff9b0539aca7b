"""MOTChallenge text format: frame,id,bb_left,bb_top,bb_width,bb_height,conf,x,y,z."""
import logging
import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Union

import numpy as np
from pydantic import ValidationError

from app.models import MotLine

logger = logging.getLogger(__name__)

NUM_FIELDS = 10
DECIMALS = 3


class MotFormatError(ValueError):
    """A malformed line in a MOTChallenge file."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def format_number(value: float) -> str:
    """Fixed point with at most three decimals, trailing zeros and dot removed."""
    text = f"{value:.{DECIMALS}f}".rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def format_line(line: MotLine) -> str:
    return ",".join([
        str(line.frame),
        str(line.id),
        *(format_number(v) for v in (line.bb_left, line.bb_top, line.bb_width, line.bb_height, line.conf, line.x, line.y, line.z)),
    ])


def _integer(text: str, name: str, line_number: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise MotFormatError(f"{name} {text!r} is not a number", line_number) from None
    if not math.isfinite(value) or value != int(value):
        raise MotFormatError(f"{name} {text!r} is not an integer", line_number)
    return int(value)


def parse_line(text: str, line_number: int) -> MotLine:
    """
    Raises:
        MotFormatError: On a wrong field count, a non-numeric field, frame < 1 or a
            non-positive box extent.
    """
    fields = [f.strip() for f in text.strip().split(",")]
    if len(fields) != NUM_FIELDS:
        raise MotFormatError(f"expected {NUM_FIELDS} fields, got {len(fields)}", line_number)
    frame = _integer(fields[0], "frame", line_number)
    identity = _integer(fields[1], "id", line_number)
    values = []
    for name, raw in zip(("bb_left", "bb_top", "bb_width", "bb_height", "conf", "x", "y", "z"), fields[2:]):
        try:
            value = float(raw)
        except ValueError:
            raise MotFormatError(f"{name} {raw!r} is not a number", line_number) from None
        if not math.isfinite(value):
            raise MotFormatError(f"{name} {raw!r} is not finite", line_number)
        values.append(value)
    if values[2] <= 0 or values[3] <= 0:
        raise MotFormatError(f"box extent {values[2]}x{values[3]} is not positive", line_number)
    try:
        return MotLine(
            frame=frame, id=identity, bb_left=values[0], bb_top=values[1], bb_width=values[2],
            bb_height=values[3], conf=values[4], x=values[5], y=values[6], z=values[7],
        )
    except ValidationError as e:
        raise MotFormatError(str(e.errors()[0]["msg"]), line_number) from None


def parse_mot(text: str) -> List[MotLine]:
    """Lines in file order; blank lines are skipped but still counted."""
    return [parse_line(raw, n) for n, raw in enumerate(text.splitlines(), start=1) if raw.strip()]


def read_mot(path: Union[str, Path]) -> List[MotLine]:
    path = Path(path)
    lines = parse_mot(path.read_text())
    logger.debug(f"read {len(lines)} lines from {path}")
    return lines


def render_mot(lines: Iterable[MotLine]) -> str:
    ordered = sorted(lines, key=lambda line: (line.frame, line.id))
    return "".join(format_line(line) + "\n" for line in ordered)


def tracks_to_lines(tracks: Sequence) -> List[MotLine]:
    """One line per (frame, track); confidence is the decoded score."""
    out = []
    for track in tracks:
        for frame, box in sorted(track.boxes.items()):
            out.append(MotLine.from_box(frame, track.id, box, conf=track.scores.get(frame, 1.0)))
    return out


def write_mot(items: Union[Iterable[MotLine], Sequence], path: Union[str, Path]) -> int:
    """
    Write MotLines (or Tracks) sorted by frame then id; returns the number of lines.
    """
    items = list(items)
    lines = tracks_to_lines(items) if items and not isinstance(items[0], MotLine) else items
    path = Path(path)
    path.write_text(render_mot(lines))
    logger.debug(f"wrote {len(lines)} lines to {path}")
    return len(lines)


def group_frames(lines: Iterable[MotLine]) -> Dict[int, List[MotLine]]:
    frames: Dict[int, List[MotLine]] = defaultdict(list)
    for line in lines:
        frames[line.frame].append(line)
    return dict(sorted(frames.items()))


def embeddings_path(det_path: Union[str, Path]) -> Path:
    """Sidecar ``<stem>_embeddings.npy`` holding one row per line of a detection file."""
    det_path = Path(det_path)
    return det_path.with_name(f"{det_path.stem}_embeddings.npy")


def write_embeddings(vectors: np.ndarray, det_path: Union[str, Path]) -> Path:
    path = embeddings_path(det_path)
    np.save(path, np.asarray(vectors, dtype=np.float64))
    return path
