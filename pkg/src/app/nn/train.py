"""Full-batch training loop for RelationTrackNet."""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from app.detect.targets import DetectionTargets, render_targets
from app.models import BoxAnnotation
from app.nn.model import RelationTrackNet
from app.nn.optim import Adam, Optimizer
from app.tensor import Tensor

logger = logging.getLogger(__name__)


@dataclass
class TrainingSample:
    image: np.ndarray
    targets: DetectionTargets
    labels: np.ndarray

    @classmethod
    def from_boxes(
        cls,
        image: np.ndarray,
        boxes: Sequence[BoxAnnotation],
        labels: Optional[Sequence[int]] = None,
        min_overlap: float = 0.7,
    ) -> "TrainingSample":
        """
        Render heatmap/size/offset targets for one (H, W, C) image.

        Labels default to the position of each box in ``boxes``.
        """
        height, width = image.shape[:2]
        targets = render_targets(boxes, height, width, min_overlap)
        labels = np.arange(len(boxes)) if labels is None else np.asarray(labels)
        return cls(image=np.asarray(image), targets=targets, labels=labels.astype(np.int64))


@dataclass
class TrainingHistory:
    total: List[float] = field(default_factory=list)
    heatmap: List[float] = field(default_factory=list)
    box: List[float] = field(default_factory=list)
    reid: List[float] = field(default_factory=list)

    def record(self, values: Dict[str, float]) -> None:
        for key, value in values.items():
            getattr(self, key).append(value)


class Trainer:
    """Runs optimiser steps on a fixed set of samples, batched together."""

    def __init__(
        self,
        model: RelationTrackNet,
        optimizer: Optional[Optimizer] = None,
        lr: float = 0.05,
        log_every: int = 50,
    ):
        self.model = model
        self.optimizer = optimizer or Adam(model.parameters(), lr=lr)
        self.log_every = log_every

    def _batch(self, samples: Sequence[TrainingSample]) -> Tensor:
        dtype = self.model.conv1.weight.dtype
        return Tensor(np.stack([s.image for s in samples]), dtype=dtype)

    def step(self, samples: Sequence[TrainingSample]) -> Dict[str, float]:
        images = self._batch(samples)
        self.optimizer.zero_grad()
        output = self.model(images)
        losses = self.model.loss(output, [s.targets for s in samples], [s.labels for s in samples])
        losses.total.backward()
        self.optimizer.step()
        return losses.as_floats()

    def evaluate(self, samples: Sequence[TrainingSample]) -> Dict[str, float]:
        output = self.model(self._batch(samples))
        return self.model.loss(output, [s.targets for s in samples], [s.labels for s in samples]).as_floats()

    def fit(self, samples: Union[TrainingSample, Sequence[TrainingSample]], steps: int) -> TrainingHistory:
        if isinstance(samples, TrainingSample):
            samples = [samples]
        if not samples:
            raise ValueError("no training samples")
        history = TrainingHistory()
        start = time.perf_counter()
        for step in range(1, steps + 1):
            values = self.step(samples)
            history.record(values)
            if step == 1 or step % self.log_every == 0 or step == steps:
                logger.info(
                    f"step {step}/{steps}: total={values['total']:.4f} heatmap={values['heatmap']:.4f} "
                    f"box={values['box']:.4f} reid={values['reid']:.4f}"
                )
        logger.info(f"Training finished in {time.perf_counter() - start:.1f}s")
        return history
