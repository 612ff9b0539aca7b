"""CLEAR-MOT, identity F1 and mostly-tracked/lost coverage."""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.config import Settings
from app.models import Box, MetricsReport, MotLine
from app.tracking.assignment import CostMatrix, hungarian, iou_matrix

logger = logging.getLogger(__name__)

# frame -> [(identity, box)]
Frames = Dict[int, List[Tuple[int, Box]]]
FrameSource = Union[Mapping[int, Sequence[Tuple[int, Box]]], Iterable[MotLine]]


class MetricsError(ValueError):
    """Evaluation input for which the metrics are undefined."""


def as_frames(source: FrameSource) -> Frames:
    """
    Normalise a mapping or a stream of MotLines into ``{frame: [(id, box)]}``.

    Raises:
        MetricsError: If an identity occurs twice in one frame.
    """
    frames: Frames = defaultdict(list)
    if isinstance(source, Mapping):
        for frame, items in source.items():
            frames[int(frame)].extend((int(i), tuple(b)) for i, b in items)
    else:
        for line in source:
            frames[line.frame].append((line.id, line.box))
    for frame, items in frames.items():
        ids = [i for i, _ in items]
        if len(set(ids)) != len(ids):
            raise MetricsError(f"frame {frame}: duplicate identity among {sorted(ids)}")
    return dict(frames)


@dataclass
class FrameMatch:
    """Correspondences of one frame as (gt id, pred id, IoU)."""
    pairs: List[Tuple[int, int, float]] = field(default_factory=list)
    unmatched_gt: List[int] = field(default_factory=list)
    unmatched_pred: List[int] = field(default_factory=list)


def match_frame(
    gt_boxes: Sequence[Tuple[int, Box]],
    pred_boxes: Sequence[Tuple[int, Box]],
    iou_thresh: float = 0.5,
    previous: Optional[Mapping[int, int]] = None,
) -> FrameMatch:
    """
    Hungarian matching on 1 - IoU with pairs below ``iou_thresh`` forbidden.

    Correspondences in ``previous`` (gt id -> pred id) are kept first when both objects
    are present and still overlap enough.
    """
    gt_ids = [i for i, _ in gt_boxes]
    pred_ids = [i for i, _ in pred_boxes]
    overlap = iou_matrix([b for _, b in gt_boxes], [b for _, b in pred_boxes])
    result = FrameMatch()
    gt_left = list(range(len(gt_ids)))
    pred_left = list(range(len(pred_ids)))

    if previous:
        pred_index = {p: j for j, p in enumerate(pred_ids)}
        for i, g in enumerate(gt_ids):
            j = pred_index.get(previous.get(g))
            if j is not None and j in pred_left and overlap[i, j] >= iou_thresh:
                result.pairs.append((g, pred_ids[j], float(overlap[i, j])))
                gt_left.remove(i)
                pred_left.remove(j)

    if gt_left and pred_left:
        sub = overlap[np.ix_(gt_left, pred_left)]
        costs = CostMatrix(1.0 - sub).forbid(sub < iou_thresh)
        for a, b in hungarian(costs).pairs:
            i, j = gt_left[a], pred_left[b]
            result.pairs.append((gt_ids[i], pred_ids[j], float(overlap[i, j])))
        matched_gt = {g for g, _, _ in result.pairs}
        matched_pred = {p for _, p, _ in result.pairs}
        gt_left = [i for i in gt_left if gt_ids[i] not in matched_gt]
        pred_left = [j for j in pred_left if pred_ids[j] not in matched_pred]

    result.pairs.sort()
    result.unmatched_gt = [gt_ids[i] for i in gt_left]
    result.unmatched_pred = [pred_ids[j] for j in pred_left]
    return result


@dataclass
class ClearMotResult:
    mota: float
    motp: float
    fp: int
    fn: int
    ids: int
    tp: int
    gt_count: int
    num_predictions: int
    # gt id -> (matched frames, total frames)
    coverage: Dict[int, Tuple[int, int]] = field(default_factory=dict)


def clear_mot(
    gt: FrameSource,
    preds: FrameSource,
    iou_thresh: float = 0.5,
    match_continuity: bool = True,
) -> ClearMotResult:
    """
    MOTA = 1 - (FP + FN + IDS) / gt_count and MOTP = mean IoU of matched pairs.

    An identity switch is counted whenever a ground-truth identity is matched to a
    different prediction id than at its previous match, gaps included.

    Raises:
        MetricsError: If there are no ground-truth boxes.
    """
    gt_frames, pred_frames = as_frames(gt), as_frames(preds)
    gt_count = sum(len(v) for v in gt_frames.values())
    if gt_count == 0:
        raise MetricsError("no ground-truth boxes: MOTA is undefined")

    last_match: Dict[int, int] = {}
    matched_frames: Dict[int, int] = defaultdict(int)
    total_frames: Dict[int, int] = defaultdict(int)
    tp = fp = fn = ids = 0
    num_predictions = 0
    iou_sum = 0.0
    for frame in sorted(set(gt_frames) | set(pred_frames)):
        gt_items = gt_frames.get(frame, [])
        pred_items = pred_frames.get(frame, [])
        num_predictions += len(pred_items)
        match = match_frame(gt_items, pred_items, iou_thresh, last_match if match_continuity else None)
        for g, _ in gt_items:
            total_frames[g] += 1
        for g, p, overlap in match.pairs:
            if g in last_match and last_match[g] != p:
                ids += 1
                logger.debug(f"frame {frame}: gt {g} switched {last_match[g]} -> {p}")
            last_match[g] = p
            matched_frames[g] += 1
            iou_sum += overlap
        tp += len(match.pairs)
        fp += len(match.unmatched_pred)
        fn += len(match.unmatched_gt)

    return ClearMotResult(
        mota=1.0 - (fp + fn + ids) / gt_count,
        motp=iou_sum / tp if tp else 0.0,
        fp=fp,
        fn=fn,
        ids=ids,
        tp=tp,
        gt_count=gt_count,
        num_predictions=num_predictions,
        coverage={g: (matched_frames[g], total_frames[g]) for g in sorted(total_frames)},
    )


@dataclass
class IdentityScores:
    idf1: float
    idtp: int
    idfp: int
    idfn: int


def identity_scores(gt: FrameSource, preds: FrameSource, iou_thresh: float = 0.5) -> IdentityScores:
    """Global one-to-one identity mapping maximising the frames where the pair overlaps."""
    gt_frames, pred_frames = as_frames(gt), as_frames(preds)
    gt_ids = sorted({g for items in gt_frames.values() for g, _ in items})
    pred_ids = sorted({p for items in pred_frames.values() for p, _ in items})
    total_gt = sum(len(v) for v in gt_frames.values())
    total_pred = sum(len(v) for v in pred_frames.values())
    if not gt_ids or not pred_ids:
        return IdentityScores(0.0, 0, total_pred, total_gt)

    g_index = {g: k for k, g in enumerate(gt_ids)}
    p_index = {p: k for k, p in enumerate(pred_ids)}
    counts = np.zeros((len(gt_ids), len(pred_ids)))
    for frame, gt_items in gt_frames.items():
        pred_items = pred_frames.get(frame, [])
        if not pred_items:
            continue
        hits = iou_matrix([b for _, b in gt_items], [b for _, b in pred_items]) >= iou_thresh
        for a, (g, _) in enumerate(gt_items):
            for b, (p, _) in enumerate(pred_items):
                if hits[a, b]:
                    counts[g_index[g], p_index[p]] += 1

    mapping = hungarian(CostMatrix(counts.max() - counts))
    idtp = int(sum(counts[i, j] for i, j in mapping.pairs))
    idfp, idfn = total_pred - idtp, total_gt - idtp
    denominator = 2 * idtp + idfp + idfn
    return IdentityScores(2 * idtp / denominator if denominator else 0.0, idtp, idfp, idfn)


def idf1(gt: FrameSource, preds: FrameSource, iou_thresh: float = 0.5) -> float:
    """IDF1 = 2 IDTP / (2 IDTP + IDFP + IDFN); 0 when either side is empty."""
    return identity_scores(gt, preds, iou_thresh).idf1


def mt_ml(
    gt: FrameSource,
    preds: FrameSource,
    iou_thresh: float = 0.5,
    mt_thresh: float = 0.8,
    ml_thresh: float = 0.2,
    match_continuity: bool = True,
) -> Tuple[float, float]:
    """Fractions of gt identities covered at least ``mt_thresh`` / at most ``ml_thresh`` (both inclusive)."""
    result = clear_mot(gt, preds, iou_thresh, match_continuity)
    return _coverage_fractions(result.coverage, mt_thresh, ml_thresh)


def _coverage_fractions(coverage: Mapping[int, Tuple[int, int]], mt_thresh: float, ml_thresh: float) -> Tuple[float, float]:
    if not coverage:
        return 0.0, 0.0
    ratios = [matched / total for matched, total in coverage.values()]
    mostly_tracked = sum(1 for r in ratios if r >= mt_thresh)
    mostly_lost = sum(1 for r in ratios if r <= ml_thresh)
    return mostly_tracked / len(ratios), mostly_lost / len(ratios)


def evaluate(gt: FrameSource, preds: FrameSource, config: Optional[Settings] = None) -> MetricsReport:
    """
    Full report for one sequence.

    Raises:
        MetricsError: If the ground truth is empty or repeats an identity in a frame.
    """
    config = config or Settings()
    gt_frames, pred_frames = as_frames(gt), as_frames(preds)
    clear = clear_mot(gt_frames, pred_frames, config.eval_iou_thresh, config.match_continuity)
    identity = identity_scores(gt_frames, pred_frames, config.eval_iou_thresh)
    mt, ml = _coverage_fractions(clear.coverage, config.mt_thresh, config.ml_thresh)
    report = MetricsReport(
        mota=clear.mota,
        motp=clear.motp,
        idf1=identity.idf1,
        fp=clear.fp,
        fn=clear.fn,
        ids=clear.ids,
        mt=mt,
        ml=ml,
        gt_count=clear.gt_count,
        tp=clear.tp,
        num_predictions=clear.num_predictions,
        idtp=identity.idtp,
        idfp=identity.idfp,
        idfn=identity.idfn,
    )
    logger.info(f"Evaluated {clear.gt_count} gt boxes: MOTA={report.mota:.3f} IDF1={report.idf1:.3f}")
    return report
