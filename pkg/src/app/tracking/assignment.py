"""Cost matrices and optimal assignment for track/detection association."""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from app.models import Box, Detection
from app.tensor import Tensor

logger = logging.getLogger(__name__)

# Sentinel for pairs that must never be matched.
FORBIDDEN = np.inf
NORM_EPS = 1e-12
TIE_RTOL = 1e-9


class DegenerateEmbeddingError(ValueError):
    """An embedding vector has (numerically) zero length."""


@dataclass
class CostMatrix:
    """
    Rows are tracks, columns are detections.

    Entries are finite and non-negative, or ``FORBIDDEN``.
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"cost matrix must be 2-D, got shape {values.shape}")
        finite = np.isfinite(values)
        if np.any(np.isnan(values)) or np.any(values[finite] < 0) or np.any(values[~finite] < 0):
            raise ValueError("cost entries must be non-negative reals or FORBIDDEN")
        self.values = values

    @classmethod
    def empty(cls, rows: int, cols: int) -> "CostMatrix":
        return cls(np.zeros((rows, cols)))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    @property
    def allowed(self) -> np.ndarray:
        return np.isfinite(self.values)

    def forbid(self, mask: np.ndarray) -> "CostMatrix":
        """Copy with every entry under ``mask`` set to ``FORBIDDEN``."""
        values = self.values.copy()
        values[np.asarray(mask, dtype=bool)] = FORBIDDEN
        return CostMatrix(values)


@dataclass
class Assignment:
    pairs: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_rows: List[int] = field(default_factory=list)
    unmatched_cols: List[int] = field(default_factory=list)

    def total(self, costs: Union[CostMatrix, np.ndarray]) -> float:
        values = costs.values if isinstance(costs, CostMatrix) else np.asarray(costs)
        return float(sum(values[i, j] for i, j in self.pairs))


def _solve(values: np.ndarray) -> Tuple[float, np.ndarray]:
    """Optimal total and column per row for a matrix with rows <= cols."""
    if values.shape[0] == 0:
        return 0.0, np.zeros(0, dtype=np.int64)
    rows, cols = linear_sum_assignment(values)
    order = np.argsort(rows)
    return float(values[rows, cols].sum()), cols[order]


def _lexicographic_optimum(values: np.ndarray) -> np.ndarray:
    """
    Column per row of the optimal matching whose column sequence is lexicographically smallest.

    Each row in turn tries the free columns smaller than its current one and keeps the
    first whose completion still reaches the optimum.
    """
    n, m = values.shape
    best, assigned = _solve(values)
    tol = TIE_RTOL * max(1.0, abs(best))
    prefix = 0.0
    used: List[int] = []
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        for j in range(int(assigned[i])):
            if j in used:
                continue
            rest_cols = np.array([c for c in range(m) if c != j and c not in used], dtype=np.int64)
            rest_total, rest_assigned = _solve(values[np.ix_(rest_rows, rest_cols)])
            if abs(prefix + values[i, j] + rest_total - best) <= tol:
                assigned = assigned.copy()
                assigned[i] = j
                assigned[i + 1:] = rest_cols[rest_assigned]
                break
        prefix += values[i, assigned[i]]
        used.append(int(assigned[i]))
    return assigned


def hungarian(costs: Union[CostMatrix, np.ndarray]) -> Assignment:
    """
    Minimum-cost matching that never uses a forbidden pair.

    Forbidden entries get a penalty larger than any all-allowed matching, so the solver
    first maximises the number of allowed pairs and then minimises their cost; penalised
    pairs are dropped afterwards. Among optimal matchings the one with the
    lexicographically smallest column sequence (over the shorter side) is returned.
    """
    matrix = costs if isinstance(costs, CostMatrix) else CostMatrix(costs)
    values = matrix.values
    n, m = values.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))

    allowed = matrix.allowed
    finite_max = float(values[allowed].max()) if allowed.any() else 0.0
    penalty = finite_max * min(n, m) + 1.0
    work = np.where(allowed, values, penalty)

    transposed = n > m
    if transposed:
        work = work.T
    assigned = _lexicographic_optimum(work)

    pairs = []
    for r, c in enumerate(assigned):
        i, j = (int(c), r) if transposed else (r, int(c))
        if allowed[i, j]:
            pairs.append((i, j))
    pairs.sort()
    matched_rows = {i for i, _ in pairs}
    matched_cols = {j for _, j in pairs}
    return Assignment(
        pairs=pairs,
        unmatched_rows=[i for i in range(n) if i not in matched_rows],
        unmatched_cols=[j for j in range(m) if j not in matched_cols],
    )


def _rows(vectors: Union[Sequence, np.ndarray]) -> np.ndarray:
    items = [getattr(v, "embedding", v) for v in vectors]
    if not items:
        return np.zeros((0, 0))
    return np.stack([np.asarray(v, dtype=np.float64).reshape(-1) for v in items])


def cosine_cost(tracks: Union[Sequence, np.ndarray], det_embeddings: Union[Sequence, np.ndarray]) -> CostMatrix:
    """1 - <track embedding, detection embedding>, clipped to [0, 2]; rows accept Tracks or vectors."""
    a, b = _rows(tracks), _rows(det_embeddings)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return CostMatrix.empty(a.shape[0], b.shape[0])
    return CostMatrix(np.clip(1.0 - a @ b.T, 0.0, 2.0))


def iou_matrix(boxes_a: Sequence[Box], boxes_b: Sequence[Box]) -> np.ndarray:
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    inter_w = np.clip(np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0.0, None)
    inter_h = np.clip(np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0.0, None)
    inter = inter_w * inter_h
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.divide(inter, union, out=np.zeros_like(inter), where=union > 0)


def iou_cost(boxes_a: Sequence[Box], boxes_b: Sequence[Box], min_iou: Optional[float] = None) -> CostMatrix:
    """1 - IoU; pairs below ``min_iou`` are forbidden when it is given."""
    overlap = iou_matrix(boxes_a, boxes_b)
    costs = CostMatrix(1.0 - overlap)
    if min_iou is not None:
        costs = costs.forbid(overlap < min_iou)
    return costs


def normalize(vector: np.ndarray) -> np.ndarray:
    vector = np.asarray(vector, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(vector))
    if norm < NORM_EPS:
        raise DegenerateEmbeddingError("cannot normalise a zero embedding")
    return vector / norm


def embeddings_at_centers(emb_map: Union[Tensor, np.ndarray], detections: Sequence[Detection]) -> List[np.ndarray]:
    """
    Unit embedding read at each detection's center cell of an (h, w, D) map.

    Raises:
        DegenerateEmbeddingError: If a center cell holds the zero vector.
        ValueError: If a center lies outside the map.
    """
    data = emb_map.data if isinstance(emb_map, Tensor) else np.asarray(emb_map)
    if data.ndim == 4 and data.shape[0] == 1:
        data = data[0]
    if data.ndim != 3:
        raise ValueError(f"embedding map must be (h, w, D), got {data.shape}")
    height, width = data.shape[:2]
    out = []
    for det in detections:
        x, y = det.center
        if not (0 <= x < width and 0 <= y < height):
            raise ValueError(f"center {det.center} outside a {width}x{height} grid")
        out.append(normalize(data[y, x]))
    return out
