"""CenterNet-style detection branch: targets, losses and decoding."""
from app.detect.decode import decode, peak_mask
from app.detect.losses import (
    LossWeights,
    box_loss,
    heatmap_loss,
    one_hot,
    reid_loss,
    reid_loss_from_logits,
    total_loss,
)
from app.detect.targets import (
    STRIDE,
    DegenerateBoxError,
    DetectionTargets,
    gaussian_radius,
    render_targets,
)

__all__ = [
    "STRIDE",
    "DegenerateBoxError",
    "DetectionTargets",
    "LossWeights",
    "box_loss",
    "decode",
    "gaussian_radius",
    "heatmap_loss",
    "one_hot",
    "peak_mask",
    "reid_loss",
    "reid_loss_from_logits",
    "render_targets",
    "total_loss",
]
