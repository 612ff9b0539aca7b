"""
Global context disentangling.

One softmax-pooled context vector per image is pushed through two small
transform branches; their outputs are broadcast-added to every position, giving a
detection-specific map and a ReID-specific map from the same backbone features.
"""
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.nn.module import Module, uniform_fan_in, zeros
from app.tensor import DEFAULT_DTYPE, DimensionError, Tensor, linear_map, relu, softmax


class GcdParams(Module):
    """
    Weights of the disentangling block.

    W_k scores positions for pooling; (W_d1, W_d2) and (W_r1, W_r2) are the detection
    and ReID branches. The second matrix of each branch starts at zero, so a fresh
    block passes features through unchanged.
    """

    def __init__(
        self,
        channels: int,
        reduction: int = 4,
        epsilon: float = 1e-5,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ):
        if epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        mid = max(1, channels // max(reduction, 1))
        rng = rng if rng is not None else np.random.default_rng(0)
        self.channels = channels
        self.epsilon = epsilon
        self.W_k = uniform_fan_in((channels, 1), channels, rng, "W_k", dtype)
        self.W_d1 = uniform_fan_in((channels, mid), channels, rng, "W_d1", dtype)
        self.W_d2 = zeros((mid, channels), "W_d2", dtype)
        self.W_r1 = uniform_fan_in((channels, mid), channels, rng, "W_r1", dtype)
        self.W_r2 = zeros((mid, channels), "W_r2", dtype)

    @property
    def mid_channels(self) -> int:
        return self.W_d1.shape[1]


@dataclass
class DisentangledFeatures:
    det: Tensor
    reid: Tensor


def layer_norm(v: Tensor, epsilon: float = 1e-5, axes: Optional[Sequence[int]] = None) -> Tensor:
    """
    Normalise to zero mean and unit variance without a learned affine.

    By default statistics run over every non-batch axis jointly (a 1-D input is a single
    element). ``axes`` overrides that, e.g. ``(-1,)`` for per-position channel norm.

    Raises:
        DimensionError: If there is nothing to normalise over.
    """
    if axes is None:
        axes = (0,) if v.ndim == 1 else tuple(range(1, v.ndim))
    axes = tuple(axes)
    if v.ndim == 0 or not axes:
        raise DimensionError(f"layer_norm needs at least one non-batch element, got shape {v.shape}")
    centered = v - v.mean(axis=axes, keepdims=True)
    variance = (centered * centered).mean(axis=axes, keepdims=True)
    return centered * (variance + epsilon) ** -0.5


def context_weights(x: Tensor, W_k: Tensor) -> Tensor:
    """Softmax pooling weights over the H'*W' positions of each image, shape (B, N_p)."""
    if x.ndim != 4 or W_k.shape != (x.shape[3], 1):
        raise DimensionError(f"context pooling of {x.shape} with W_k {W_k.shape}")
    batch, height, width, channels = x.shape
    logits = linear_map(x.reshape(batch * height * width, channels), W_k)
    return softmax(logits.reshape(batch, height * width), axis=1)


def context_vector(x: Tensor, W_k: Tensor) -> Tensor:
    """z_b = sum_j softmax_j(W_k x_bj) x_bj, shape (B, C); O(N_p * C) per image."""
    batch, height, width, channels = x.shape
    weights = context_weights(x, W_k)
    positions = x.reshape(batch, height * width, channels)
    return (positions * weights.reshape(batch, height * width, 1)).sum(axis=1)


def _branch(z: Tensor, first: Tensor, second: Tensor, epsilon: float) -> Tensor:
    return linear_map(relu(layer_norm(linear_map(z, first), epsilon)), second)


def transform(z: Tensor, params: GcdParams) -> Tuple[Tensor, Tensor]:
    """The two post-pooling branches; cost O(C * C_mid), independent of H'*W'."""
    det = _branch(z, params.W_d1, params.W_d2, params.epsilon)
    reid = _branch(z, params.W_r1, params.W_r2, params.epsilon)
    return det, reid


def disentangle(x: Tensor, params: GcdParams) -> DisentangledFeatures:
    """
    Split backbone features into detection- and ReID-specific maps.

    Raises:
        DimensionError: If ``x`` is not (B, H', W', C) with C matching ``params``.
    """
    if x.ndim != 4 or x.shape[3] != params.channels:
        raise DimensionError(f"disentangle of {x.shape} with {params.channels}-channel params")
    batch, _, _, channels = x.shape
    det_delta, reid_delta = transform(context_vector(x, params.W_k), params)
    return DisentangledFeatures(
        det=x + det_delta.reshape(batch, 1, 1, channels),
        reid=x + reid_delta.reshape(batch, 1, 1, channels),
    )
