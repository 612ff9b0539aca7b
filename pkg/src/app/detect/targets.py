"""Heatmap, size and offset training targets on the stride-4 grid."""
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np

from app.models import BoxAnnotation

logger = logging.getLogger(__name__)

STRIDE = 4


class DegenerateBoxError(ValueError):
    """Box has non-positive width or height."""
    pass


@dataclass
class DetectionTargets:
    """
    Ground truth for one frame.

    ``centers`` holds integer (x, y) grid cells; ``offsets`` the sub-cell residual of
    the true center in [0, 1); ``sizes`` the pixel (width, height).
    """
    heatmap: np.ndarray
    sizes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    offsets: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    centers: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    identities: np.ndarray = field(default_factory=lambda: np.zeros((0,), dtype=np.int64))

    @property
    def num_objects(self) -> int:
        return int(self.centers.shape[0])


def gaussian_radius(height: float, width: float, min_overlap: float = 0.7) -> float:
    """
    Largest center displacement keeping IoU >= ``min_overlap`` with the true box.

    Smallest root of the three corner cases (both corners inside, both outside, one of each).
    """
    b1 = height + width
    c1 = width * height * (1 - min_overlap) / (1 + min_overlap)
    r1 = (b1 + math.sqrt(b1 ** 2 - 4 * c1)) / 2

    a2 = 4
    b2 = 2 * (height + width)
    c2 = (1 - min_overlap) * width * height
    r2 = (b2 + math.sqrt(b2 ** 2 - 4 * a2 * c2)) / 2

    a3 = 4 * min_overlap
    b3 = -2 * min_overlap * (height + width)
    c3 = (min_overlap - 1) * width * height
    r3 = (b3 + math.sqrt(b3 ** 2 - 4 * a3 * c3)) / 2
    return min(r1, r2, r3)


def draw_gaussian(heatmap: np.ndarray, center: Tuple[int, int], sigma: float, radius: int) -> None:
    """Max-combine exp(-d^2 / 2 sigma^2) into ``heatmap`` around integer (x, y) ``center``."""
    grid_h, grid_w = heatmap.shape
    cx, cy = center
    top, bottom = max(0, cy - radius), min(grid_h, cy + radius + 1)
    left, right = max(0, cx - radius), min(grid_w, cx + radius + 1)
    ys = np.arange(top, bottom)[:, None] - cy
    xs = np.arange(left, right)[None, :] - cx
    if sigma <= 0:
        bump = ((xs == 0) & (ys == 0)).astype(heatmap.dtype)
    else:
        bump = np.exp(-(xs * xs + ys * ys) / (2.0 * sigma * sigma))
    np.maximum(heatmap[top:bottom, left:right], bump, out=heatmap[top:bottom, left:right])


def _as_box(item: Union[BoxAnnotation, Sequence[float]]) -> Tuple[Tuple[float, float, float, float], int]:
    if isinstance(item, BoxAnnotation):
        return item.box, item.identity
    values = tuple(float(v) for v in item)
    if len(values) not in (4, 5):
        raise ValueError(f"expected (l, t, r, b[, identity]), got {item!r}")
    identity = int(values[4]) if len(values) == 5 else 0
    return values[:4], identity


def render_targets(
    boxes: Sequence[Union[BoxAnnotation, Sequence[float]]],
    height: int,
    width: int,
    min_overlap: float = 0.7,
) -> DetectionTargets:
    """
    Render the heatmap, sizes and offsets for one image.

    Each object adds a Gaussian bump at its center cell with sigma = radius / 3, where the
    radius follows the minimum-overlap rule at grid scale; overlapping bumps combine by
    element-wise maximum so peaks stay at exactly 1.

    Raises:
        DegenerateBoxError: If a box has r <= l or b <= t.
        ValueError: If the image is not a multiple of the stride or a box leaves the image.
    """
    if height % STRIDE or width % STRIDE:
        raise ValueError(f"image {height}x{width} is not a multiple of the stride {STRIDE}")
    grid_h, grid_w = height // STRIDE, width // STRIDE
    heatmap = np.zeros((grid_h, grid_w), dtype=np.float64)
    sizes, offsets, centers, identities = [], [], [], []

    for item in boxes:
        (left, top, right, bottom), identity = _as_box(item)
        if not (right > left and bottom > top):
            raise DegenerateBoxError(f"degenerate box ({left}, {top}, {right}, {bottom})")
        if left < 0 or top < 0 or right > width or bottom > height:
            raise ValueError(f"box ({left}, {top}, {right}, {bottom}) leaves the {width}x{height} image")

        cx, cy = (left + right) / 2.0, (top + bottom) / 2.0
        gx, gy = cx / STRIDE, cy / STRIDE
        cell = (int(math.floor(gx)), int(math.floor(gy)))
        radius = gaussian_radius((bottom - top) / STRIDE, (right - left) / STRIDE, min_overlap)
        draw_gaussian(heatmap, cell, sigma=radius / 3.0, radius=int(radius))

        sizes.append((right - left, bottom - top))
        offsets.append((gx - cell[0], gy - cell[1]))
        centers.append(cell)
        identities.append(identity)

    logger.debug(f"rendered targets for {len(centers)} objects on a {grid_h}x{grid_w} grid")
    return DetectionTargets(
        heatmap=heatmap,
        sizes=np.asarray(sizes, dtype=np.float64).reshape(-1, 2),
        offsets=np.asarray(offsets, dtype=np.float64).reshape(-1, 2),
        centers=np.asarray(centers, dtype=np.int64).reshape(-1, 2),
        identities=np.asarray(identities, dtype=np.int64),
    )
