"""Seeded synthetic sequences with oracle detections and identity embeddings."""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config import Settings
from app.detect.targets import STRIDE
from app.models import BoxAnnotation, Detection, MotLine, SyntheticScenario
from app.tracking.tracker import FrameObservation

logger = logging.getLogger(__name__)

# Boxes are kept this far inside the image.
MARGIN = 2.0


class SyntheticScenarioError(ValueError):
    """A scenario that cannot be generated as requested."""


@dataclass
class SyntheticSequence:
    scenario: SyntheticScenario
    identity_embeddings: np.ndarray
    ground_truth: Dict[int, List[BoxAnnotation]] = field(default_factory=dict)
    detections: Dict[int, List[Detection]] = field(default_factory=dict)
    embeddings: Dict[int, List[np.ndarray]] = field(default_factory=dict)
    # identity of every oracle detection, aligned with ``detections``
    detection_identities: Dict[int, List[int]] = field(default_factory=dict)

    def frames(self) -> List[FrameObservation]:
        return [
            FrameObservation(frame, self.detections[frame], self.embeddings[frame])
            for frame in sorted(self.detections)
        ]

    def gt_lines(self) -> List[MotLine]:
        return [
            MotLine.from_box(frame, ann.identity, ann.box, conf=1.0)
            for frame in sorted(self.ground_truth)
            for ann in self.ground_truth[frame]
        ]

    def det_lines(self) -> List[MotLine]:
        return [
            MotLine.from_box(frame, -1, det.box, conf=det.score)
            for frame in sorted(self.detections)
            for det in self.detections[frame]
        ]

    def embedding_rows(self) -> np.ndarray:
        """Embeddings stacked in ``det_lines`` order."""
        rows = [e for frame in sorted(self.embeddings) for e in self.embeddings[frame]]
        return np.stack(rows) if rows else np.zeros((0, self.scenario.embedding_dim))


def identity_vectors(rng: np.random.Generator, count: int, dim: int, orthogonal: bool = True) -> np.ndarray:
    """
    ``count`` unit vectors of length ``dim``; mutually orthogonal when requested.

    Raises:
        SyntheticScenarioError: If orthogonality is requested for more vectors than dimensions.
    """
    gaussian = rng.standard_normal((dim, count))
    if orthogonal:
        if count > dim:
            raise SyntheticScenarioError(f"{count} identities cannot be orthogonal in {dim} dimensions")
        q, _ = np.linalg.qr(gaussian)
        return q.T[:count].copy()
    return (gaussian / np.linalg.norm(gaussian, axis=0, keepdims=True)).T.copy()


def _box_sizes(rng: np.random.Generator, s: SyntheticScenario) -> np.ndarray:
    if s.box_size is not None:
        return np.tile(np.asarray(s.box_size, dtype=np.float64), (s.n_identities, 1))
    widths = rng.uniform(0.03, 0.06, s.n_identities) * s.width
    heights = np.minimum(widths * 2.0, 0.4 * s.height)
    return np.stack([widths, heights], axis=1)


def _check_fits(s: SyntheticScenario, sizes: np.ndarray) -> None:
    if np.any(sizes[:, 0] + 2 * MARGIN >= s.width) or np.any(sizes[:, 1] + 2 * MARGIN >= s.height):
        raise SyntheticScenarioError(f"boxes of up to {sizes.max(axis=0)} do not fit a {s.width}x{s.height} image")


def _linear_paths(rng: np.random.Generator, s: SyntheticScenario, sizes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    low = sizes / 2.0 + MARGIN
    high = np.array([s.width, s.height]) - sizes / 2.0 - MARGIN
    start = rng.uniform(low, high)
    end = rng.uniform(low, high)
    return start, end


def _crossing_paths(rng: np.random.Generator, s: SyntheticScenario, sizes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs of identities swap x positions on a shared row; an odd one out moves linearly."""
    start, end = _linear_paths(rng, s, sizes)
    pairs = s.n_identities // 2
    for k in range(pairs):
        a, b = 2 * k, 2 * k + 1
        width = max(sizes[a, 0], sizes[b, 0])
        y = s.height * (k + 1) / (pairs + 1)
        y = float(np.clip(y, max(sizes[a, 1], sizes[b, 1]) / 2 + MARGIN, s.height - max(sizes[a, 1], sizes[b, 1]) / 2 - MARGIN))
        left = width / 2.0 + MARGIN + 0.1 * s.width
        right = s.width - width / 2.0 - MARGIN - 0.1 * s.width
        if right <= left:
            left, right = width / 2.0 + MARGIN, s.width - width / 2.0 - MARGIN
        start[a], end[a] = (left, y), (right, y)
        start[b], end[b] = (right, y), (left, y)
    return start, end


def _center_cell(cx: float, cy: float, s: SyntheticScenario) -> Tuple[int, int]:
    x = int(np.clip(cx // STRIDE, 0, max(s.width // STRIDE - 1, 0)))
    y = int(np.clip(cy // STRIDE, 0, max(s.height // STRIDE - 1, 0)))
    return x, y


def synth_sequence(scenario: SyntheticScenario) -> SyntheticSequence:
    """
    Ground truth plus oracle detections and embeddings, reproducible from the seed.

    Every identity is present in every frame. Each oracle detection carries its identity
    vector plus Gaussian noise (renormalised); detections are dropped independently at the
    dropout rate, except on an identity's first and last frame.

    Raises:
        SyntheticScenarioError: If the identities cannot be orthogonal or boxes do not fit.
    """
    s = scenario
    rng = np.random.default_rng(s.seed)
    vectors = identity_vectors(rng, s.n_identities, s.embedding_dim, s.orthogonal)
    sizes = _box_sizes(rng, s)
    _check_fits(s, sizes)
    start, end = _crossing_paths(rng, s, sizes) if s.motion == "crossing" else _linear_paths(rng, s, sizes)

    sequence = SyntheticSequence(scenario=s, identity_embeddings=vectors)
    for frame in range(1, s.n_frames + 1):
        t = (frame - 1) / (s.n_frames - 1) if s.n_frames > 1 else 0.0
        centers = start + t * (end - start)
        gt, dets, embs, ids = [], [], [], []
        for k in range(s.n_identities):
            (cx, cy), (w, h) = centers[k], sizes[k]
            ann = BoxAnnotation(l=cx - w / 2, t=cy - h / 2, r=cx + w / 2, b=cy + h / 2, identity=k + 1)
            gt.append(ann)
            drop = rng.random() < s.dropout
            noise = rng.standard_normal(s.embedding_dim)
            if drop and 1 < frame < s.n_frames:
                continue
            if s.embedding_noise > 0:
                emb = vectors[k] + s.embedding_noise * noise
                embs.append(emb / np.linalg.norm(emb))
            else:
                embs.append(vectors[k].copy())
            dets.append(Detection(box=ann.box, score=1.0, center=_center_cell(cx, cy, s)))
            ids.append(k + 1)
        sequence.ground_truth[frame] = gt
        sequence.detections[frame] = dets
        sequence.embeddings[frame] = embs
        sequence.detection_identities[frame] = ids
    logger.info(
        f"Synthesised {s.n_identities} identities over {s.n_frames} frames "
        f"({sum(len(d) for d in sequence.detections.values())} detections)"
    )
    return sequence


def scenario_from_settings(config: Settings, **overrides) -> SyntheticScenario:
    values = dict(
        seed=config.seed,
        n_identities=config.synth_identities,
        n_frames=config.synth_frames,
        width=config.synth_width,
        height=config.synth_height,
        motion=config.synth_motion,
        dropout=config.synth_dropout,
        embedding_noise=config.synth_embedding_noise,
        embedding_dim=config.synth_embedding_dim,
    )
    values.update(overrides)
    return SyntheticScenario(**values)


def identity_color(identity: int) -> np.ndarray:
    """Deterministic RGB in [0.3, 1] per identity."""
    rng = np.random.default_rng(1000 + identity)
    return rng.uniform(0.3, 1.0, 3)


def render_frame_image(
    boxes: Sequence[BoxAnnotation],
    width: int,
    height: int,
    seed: int = 0,
    background: float = 0.1,
) -> np.ndarray:
    """
    (H, W, 3) float32 image: dim noisy background, each box a checkered patch in its identity colour.

    Later boxes paint over earlier ones.
    """
    rng = np.random.default_rng(seed)
    image = background + 0.02 * rng.standard_normal((height, width, 3))
    ys, xs = np.mgrid[0:height, 0:width]
    checker = (((ys // 2) + (xs // 2)) % 2).astype(np.float64)
    for ann in boxes:
        top, bottom = max(int(round(ann.t)), 0), min(int(round(ann.b)), height)
        left, right = max(int(round(ann.l)), 0), min(int(round(ann.r)), width)
        if bottom <= top or right <= left:
            continue
        color = identity_color(ann.identity)
        patch = checker[top:bottom, left:right, None]
        image[top:bottom, left:right] = color * (0.7 + 0.3 * patch)
    return np.clip(image, 0.0, 1.0).astype(np.float32)


def render_sequence_frame(sequence: SyntheticSequence, frame: int) -> np.ndarray:
    s = sequence.scenario
    return render_frame_image(sequence.ground_truth[frame], s.width, s.height, seed=s.seed * 100003 + frame)
