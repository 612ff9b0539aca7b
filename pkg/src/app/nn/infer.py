"""Per-frame inference: network forward, peak decoding and embedding readout."""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from app.config import Settings
from app.detect.decode import decode
from app.models import Detection
from app.nn.model import ModelOutput, RelationTrackNet
from app.tensor import Tensor
from app.tracking.assignment import DegenerateEmbeddingError, embeddings_at_centers

logger = logging.getLogger(__name__)


@dataclass
class FrameInference:
    detections: List[Detection]
    embeddings: List[np.ndarray]
    output: ModelOutput

    def maps(self) -> dict:
        """Named maps of the single image, for tensor dumps."""
        return {
            "backbone": self.output.features.data[0],
            "det": self.output.det.data[0],
            "reid": self.output.reid.data[0],
            "heatmap": self.output.heatmap.data[0],
        }


def infer_frame(model: RelationTrackNet, image: np.ndarray, config: Optional[Settings] = None) -> FrameInference:
    """
    Detect and embed the targets of one (H, W, 3) image.

    Detections whose embedding is degenerate are dropped.
    """
    config = config or Settings()
    output = model(Tensor(image[None], dtype=model.conv1.weight.dtype))
    candidates = decode(
        output.heatmap.data[0],
        output.offset.data[0],
        output.size.data[0],
        max_k=config.max_k,
        score_thresh=config.score_thresh,
    )
    detections, embeddings = [], []
    for det in candidates:
        try:
            embeddings.extend(embeddings_at_centers(output.embedding.data[0], [det]))
        except DegenerateEmbeddingError:
            logger.warning(f"dropping detection at cell {det.center}: zero embedding")
            continue
        detections.append(det)
    return FrameInference(detections, embeddings, output)
