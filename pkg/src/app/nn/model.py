"""Desk-scale network: strided conv backbone, GCD, GTE and CenterNet-style heads."""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.config import Settings
from app.detect.losses import LossWeights, box_loss, heatmap_loss, reid_loss_from_logits, total_loss
from app.detect.targets import DetectionTargets
from app.nn.gcd import GcdParams, disentangle
from app.nn.gte import GteParams, gte_forward
from app.nn.module import Module, constant, uniform_fan_in, zeros
from app.tensor import DEFAULT_DTYPE, DimensionError, Tensor, as_tensor, clamp, gather, linear_map, pad2d, relu, sigmoid

logger = logging.getLogger(__name__)

# CenterNet's prior: sigmoid(-2.19) ~ 0.1 on every cell at start.
HEATMAP_BIAS = -2.19
PROB_EPS = 1e-6


class Conv2d(Module):
    """k x k convolution on (B, H, W, C) maps via patch gathering and one linear map."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel: int = 3,
        stride: int = 1,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
        name: str = "conv",
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = kernel * kernel * in_channels
        self.kernel = kernel
        self.stride = stride
        self.in_channels = in_channels
        self.weight = uniform_fan_in((fan_in, out_channels), fan_in, rng, f"{name}.weight", dtype)
        self.bias = zeros((out_channels,), f"{name}.bias", dtype)

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[3] != self.in_channels:
            raise DimensionError(f"conv expects (B, H, W, {self.in_channels}), got {x.shape}")
        batch, height, width, channels = x.shape
        k, s, pad = self.kernel, self.stride, self.kernel // 2
        out_h = (height + 2 * pad - k) // s + 1
        out_w = (width + 2 * pad - k) // s + 1
        padded = pad2d(x, pad)
        _, padded_h, padded_w, _ = padded.shape

        b = np.arange(batch).reshape(-1, 1, 1, 1, 1, 1)
        ys = (np.arange(out_h) * s).reshape(1, -1, 1, 1, 1, 1) + np.arange(k).reshape(1, 1, 1, -1, 1, 1)
        xs = (np.arange(out_w) * s).reshape(1, 1, -1, 1, 1, 1) + np.arange(k).reshape(1, 1, 1, 1, -1, 1)
        c = np.arange(channels).reshape(1, 1, 1, 1, 1, -1)
        indices = ((b * padded_h + ys) * padded_w + xs) * channels + c

        patches = gather(padded, indices).reshape(batch * out_h * out_w, k * k * channels)
        out = linear_map(patches, self.weight, self.bias)
        return out.reshape(batch, out_h, out_w, self.weight.shape[1])


@dataclass
class ModelOutput:
    features: Tensor
    det: Tensor
    reid: Tensor
    heatmap: Tensor
    offset: Tensor
    size: Tensor
    embedding: Tensor


@dataclass
class LossBreakdown:
    heatmap: Tensor
    box: Tensor
    reid: Tensor
    total: Tensor

    def as_floats(self) -> dict:
        return {k: float(getattr(self, k).data) for k in ("heatmap", "box", "reid", "total")}


class RelationTrackNet(Module):
    """
    Two stride-2 convolutions (stride 4 overall), GCD, GTE and the prediction heads.

    ``use_gcd=False`` feeds the backbone map to both branches (ablation).
    """

    def __init__(
        self,
        in_channels: int = 3,
        channels: int = 32,
        num_classes: int = 2,
        config: Optional[Settings] = None,
        rng: Optional[np.random.Generator] = None,
        dtype: Optional[np.dtype] = None,
    ):
        config = config or Settings()
        dtype = np.dtype(config.dtype) if dtype is None else np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        hidden = max(1, channels // 2)
        self.use_gcd = config.use_gcd
        self.alpha = config.heatmap_alpha
        self.beta = config.heatmap_beta
        self.num_classes = num_classes

        self.conv1 = Conv2d(in_channels, hidden, 3, 2, rng, dtype, "conv1")
        self.conv2 = Conv2d(hidden, channels, 3, 2, rng, dtype, "conv2")
        self.gcd = GcdParams(channels, config.gcd_reduction, config.gcd_epsilon, rng, dtype)
        self.gte = GteParams.build(
            channels,
            num_blocks=config.num_blocks,
            attention=config.attention,
            num_heads=config.num_heads,
            num_keys=config.num_keys,
            ffn_ratio=config.ffn_ratio,
            embed_dim=config.embed_dim,
            epsilon=config.gcd_epsilon,
            rng=rng,
            dtype=dtype,
        )
        self.heatmap_head = Conv2d(channels, 1, 3, 1, rng, dtype, "heatmap_head")
        self.heatmap_head.bias = constant((1,), HEATMAP_BIAS, "heatmap_head.bias", dtype)
        self.offset_head = Conv2d(channels, 2, 3, 1, rng, dtype, "offset_head")
        self.size_head = Conv2d(channels, 2, 3, 1, rng, dtype, "size_head")
        self.classifier = uniform_fan_in((config.embed_dim, num_classes), config.embed_dim, rng, "classifier", dtype)
        self.loss_weights = LossWeights(dtype)

    def forward(self, images: Tensor) -> ModelOutput:
        """Run (B, H, W, C_in) images through the network; H and W must be multiples of 4."""
        images = as_tensor(images, dtype=self.conv1.weight.dtype)
        features = relu(self.conv2(relu(self.conv1(images))))
        if self.use_gcd:
            parts = disentangle(features, self.gcd)
            det, reid = parts.det, parts.reid
        else:
            det = reid = features
        batch, height, width, _ = det.shape
        heatmap = clamp(sigmoid(self.heatmap_head(det)), PROB_EPS, 1.0 - PROB_EPS)
        return ModelOutput(
            features=features,
            det=det,
            reid=reid,
            heatmap=heatmap.reshape(batch, height, width),
            offset=self.offset_head(det),
            size=self.size_head(det),
            embedding=gte_forward(reid, self.gte),
        )

    __call__ = forward

    def loss(self, output: ModelOutput, targets: Sequence[DetectionTargets], labels: Sequence[np.ndarray]) -> LossBreakdown:
        """
        Uncertainty-weighted total of heatmap, box and identity losses over a batch.

        Args:
            output: Result of ``forward``.
            targets: Rendered targets, one per image.
            labels: Per image, class index of every target (aligned with its centers).
        """
        batch = output.heatmap.shape[0]
        if len(targets) != batch or len(labels) != batch:
            raise DimensionError(f"{len(targets)} targets / {len(labels)} label sets for a batch of {batch}")
        L_h = None
        for b, target in enumerate(targets):
            term = heatmap_loss(output.heatmap[b], target.heatmap, self.alpha, self.beta)
            L_h = term if L_h is None else L_h + term

        centers = np.concatenate([t.centers for t in targets]).reshape(-1, 2)
        batch_index = np.concatenate([np.full(t.num_objects, b) for b, t in enumerate(targets)]).astype(np.int64)
        o = gather_cells(output.offset, batch_index, centers)
        s = gather_cells(output.size, batch_index, centers)
        L_b = box_loss(o, s, np.concatenate([t.offsets for t in targets]).reshape(-1, 2),
                       np.concatenate([t.sizes for t in targets]).reshape(-1, 2))

        embeddings = gather_cells(output.embedding, batch_index, centers)
        logits = linear_map(embeddings, self.classifier)
        L_r = reid_loss_from_logits(logits, np.concatenate(list(labels)).astype(np.int64), self.num_classes)
        return LossBreakdown(L_h, L_b, L_r, total_loss(L_h, L_b, L_r, self.loss_weights))


def gather_cells(fmap: Tensor, batch_index: np.ndarray, centers: np.ndarray) -> Tensor:
    """Rows of a (B, h, w, C) map at (batch, x, y) cells, shape (N, C)."""
    _, height, width, channels = fmap.shape
    cells = (batch_index * height + centers[:, 1]) * width + centers[:, 0]
    indices = cells.reshape(-1, 1) * channels + np.arange(channels).reshape(1, -1)
    return gather(fmap, indices)
