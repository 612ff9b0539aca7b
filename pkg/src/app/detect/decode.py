"""Turn predicted heatmap, offset and size maps into detections."""
import logging
from typing import List, Union

import numpy as np

from app.detect.targets import STRIDE
from app.models import Detection
from app.tensor import Tensor

logger = logging.getLogger(__name__)

MIN_EXTENT = 1e-3


def _array(value: Union[Tensor, np.ndarray]) -> np.ndarray:
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def peak_mask(R: np.ndarray) -> np.ndarray:
    """
    Cells that are maxima of their 3x3 window, one cell per tie.

    A cell must be at least every in-bounds neighbour and strictly above the neighbours
    that precede it in row-major order, so of two equal adjacent cells only the first
    survives. A window that is flat throughout has no peak, so a uniform map yields nothing.
    """
    height, width = R.shape
    padded = np.pad(R, 1, mode="constant", constant_values=-np.inf)
    inside = np.pad(np.ones_like(R, dtype=bool), 1, mode="constant", constant_values=False)
    at_least_all = np.ones_like(R, dtype=bool)
    above_earlier = np.ones_like(R, dtype=bool)
    above_some = np.zeros_like(R, dtype=bool)
    has_neighbour = np.zeros_like(R, dtype=bool)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            neighbour = padded[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
            valid = inside[1 + dy:1 + dy + height, 1 + dx:1 + dx + width]
            at_least_all &= R >= neighbour
            if (dy, dx) < (0, 0):
                above_earlier &= R > neighbour
            above_some |= valid & (R > neighbour)
            has_neighbour |= valid
    return at_least_all & above_earlier & (above_some | ~has_neighbour)


def decode(
    R: Union[Tensor, np.ndarray],
    o: Union[Tensor, np.ndarray],
    s: Union[Tensor, np.ndarray],
    max_k: int = 128,
    score_thresh: float = 0.4,
) -> List[Detection]:
    """
    Pick 3x3 peaks of the heatmap and read offsets and sizes there.

    Peaks follow ``peak_mask``: equal neighbours go to the first in row-major order.
    Peaks scoring above ``score_thresh`` are ranked by score (ties in row-major order)
    and the best ``max_k`` become boxes centred at 4 * (cell + offset).

    Args:
        R: Heatmap probabilities, shape (h, w).
        o: Sub-cell offsets (dx, dy), shape (h, w, 2).
        s: Box sizes (width, height) in pixels, shape (h, w, 2).
    """
    heat, offsets, sizes = _array(R), _array(o), _array(s)
    if heat.ndim != 2 or offsets.shape != heat.shape + (2,) or sizes.shape != heat.shape + (2,):
        raise ValueError(f"maps disagree: heatmap {heat.shape}, offsets {offsets.shape}, sizes {sizes.shape}")

    candidates = np.flatnonzero(peak_mask(heat) & (heat > score_thresh))
    scores = heat.reshape(-1)[candidates]
    order = np.argsort(-scores, kind="stable")[:max_k]

    detections = []
    width = heat.shape[1]
    for flat in candidates[order]:
        y, x = divmod(int(flat), width)
        cx = STRIDE * (x + float(offsets[y, x, 0]))
        cy = STRIDE * (y + float(offsets[y, x, 1]))
        w = max(float(sizes[y, x, 0]), MIN_EXTENT)
        h = max(float(sizes[y, x, 1]), MIN_EXTENT)
        detections.append(
            Detection(
                box=(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
                score=float(np.clip(heat[y, x], 0.0, 1.0)),
                center=(x, y),
            )
        )
    logger.debug(f"decoded {len(detections)} detections from {candidates.size} peaks")
    return detections
