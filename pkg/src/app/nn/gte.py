"""
Guided transformer encoder.

Encoder blocks whose attention samples a handful of query-conditioned key points
(deformable attention) instead of every position, followed by a linear head that
turns ReID-specific features into embeddings. A dense dot-product attention is kept
as the reference for equivalence and complexity checks.
"""
import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from app.nn.gcd import layer_norm
from app.nn.module import Module, uniform_fan_in, zeros
from app.tensor import (
    DEFAULT_DTYPE,
    DimensionError,
    Tensor,
    as_tensor,
    bilinear_sample,
    concat,
    linear_map,
    relu,
    softmax,
)

logger = logging.getLogger(__name__)


class DeformAttnParams(Module):
    """
    Projections of one deformable attention layer.

    offset_proj gives 2 * N_k * N_head offset channels (dy, dx per key and head) and is
    zero-initialised, so a fresh layer samples every key at the query itself.
    """

    def __init__(
        self,
        channels: int,
        num_heads: int = 4,
        num_keys: int = 9,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ):
        if num_heads < 1 or channels % num_heads:
            raise ValueError(f"{channels} channels cannot be split into {num_heads} heads")
        if num_keys < 1:
            raise ValueError(f"num_keys must be at least 1, got {num_keys}")
        rng = rng if rng is not None else np.random.default_rng(0)
        head_dim = channels // num_heads
        self.channels = channels
        self.num_heads = num_heads
        self.num_keys = num_keys
        self.offset_proj = zeros((channels, 2 * num_keys * num_heads), "offset_proj", dtype)
        self.key_proj = uniform_fan_in((channels, channels), channels, rng, "key_proj", dtype)
        self.attn_proj = uniform_fan_in((channels, num_keys * num_heads), channels, rng, "attn_proj", dtype)
        self.value_proj = [
            uniform_fan_in((head_dim, head_dim), head_dim, rng, f"value_proj.{h}", dtype)
            for h in range(num_heads)
        ]
        self.out_proj = uniform_fan_in((channels, channels), channels, rng, "out_proj", dtype)

    @property
    def head_dim(self) -> int:
        return self.channels // self.num_heads


class DenseAttnParams(Module):
    """Per-head U_i, V_i (query/key), W'_i (value) and W_i (output) of global attention."""

    def __init__(
        self,
        channels: int,
        num_heads: int = 4,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ):
        if num_heads < 1 or channels % num_heads:
            raise ValueError(f"{channels} channels cannot be split into {num_heads} heads")
        rng = rng if rng is not None else np.random.default_rng(0)
        head_dim = channels // num_heads
        self.channels = channels
        self.num_heads = num_heads
        self.rho = float(np.sqrt(head_dim))
        self.U = [uniform_fan_in((channels, head_dim), channels, rng, f"U.{h}", dtype) for h in range(num_heads)]
        self.V = [uniform_fan_in((channels, head_dim), channels, rng, f"V.{h}", dtype) for h in range(num_heads)]
        self.W_value = [
            uniform_fan_in((channels, head_dim), channels, rng, f"W_value.{h}", dtype) for h in range(num_heads)
        ]
        self.W_out = [
            uniform_fan_in((head_dim, channels), head_dim, rng, f"W_out.{h}", dtype) for h in range(num_heads)
        ]


AttnParams = Union[DeformAttnParams, DenseAttnParams]


class EncoderBlockParams(Module):
    """Attention, a two-layer ReLU FFN of width ``ffn_ratio * C``, and two norm stages."""

    def __init__(
        self,
        attn: AttnParams,
        ffn_ratio: int = 4,
        epsilon: float = 1e-5,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ):
        rng = rng if rng is not None else np.random.default_rng(0)
        channels = attn.channels
        hidden = ffn_ratio * channels
        self.attn = attn
        self.epsilon = epsilon
        self.ffn_w1 = uniform_fan_in((channels, hidden), channels, rng, "ffn_w1", dtype)
        self.ffn_b1 = zeros((hidden,), "ffn_b1", dtype)
        self.ffn_w2 = uniform_fan_in((hidden, channels), hidden, rng, "ffn_w2", dtype)
        self.ffn_b2 = zeros((channels,), "ffn_b2", dtype)

    @property
    def channels(self) -> int:
        return self.attn.channels


class GteParams(Module):
    """Stacked encoder blocks plus the linear embedding head (C -> D)."""

    def __init__(
        self,
        blocks: Sequence[EncoderBlockParams],
        embed_dim: int = 64,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ):
        if not blocks:
            raise ValueError("the encoder needs at least one block")
        rng = rng if rng is not None else np.random.default_rng(0)
        channels = blocks[0].channels
        self.blocks = list(blocks)
        self.head_w = uniform_fan_in((channels, embed_dim), channels, rng, "head_w", dtype)
        self.head_b = zeros((embed_dim,), "head_b", dtype)

    @classmethod
    def build(
        cls,
        channels: int,
        num_blocks: int = 1,
        attention: str = "deformable",
        num_heads: int = 4,
        num_keys: int = 9,
        ffn_ratio: int = 4,
        embed_dim: int = 64,
        epsilon: float = 1e-5,
        rng: Optional[np.random.Generator] = None,
        dtype: np.dtype = DEFAULT_DTYPE,
    ) -> "GteParams":
        rng = rng if rng is not None else np.random.default_rng(0)
        blocks = []
        for _ in range(num_blocks):
            if attention == "dense":
                attn: AttnParams = DenseAttnParams(channels, num_heads, rng, dtype)
            else:
                attn = DeformAttnParams(channels, num_heads, num_keys, rng, dtype)
            blocks.append(EncoderBlockParams(attn, ffn_ratio, epsilon, rng, dtype))
        return cls(blocks, embed_dim, rng, dtype)


def _query_grid(height: int, width: int) -> np.ndarray:
    """(y, x) coordinates of every position in row-major order, shape (H*W, 2)."""
    ys, xs = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    return np.stack([ys, xs], axis=-1).reshape(height * width, 2)


def _check_map(x: Tensor, channels: int) -> None:
    if x.ndim != 3 or x.shape[2] != channels:
        raise DimensionError(f"expected an (H, W, {channels}) map, got {x.shape}")


def predict_offsets(x: Tensor, params: DeformAttnParams) -> Tensor:
    """Per query and head, N_k real-valued (dy, dx) offsets: shape (H, W, N_head, N_k, 2)."""
    _check_map(x, params.channels)
    height, width, channels = x.shape
    flat = linear_map(x.reshape(height * width, channels), params.offset_proj)
    return flat.reshape(height, width, params.num_heads, params.num_keys, 2)


def sample_keys(
    key_map: Tensor,
    query: Union[np.ndarray, Sequence[float]],
    offsets: Union[Tensor, np.ndarray],
) -> Tensor:
    """Key vectors at Z_q + dZ_k; ``query`` (..., 2) broadcasts against ``offsets`` (..., 2)."""
    offsets = as_tensor(offsets, key_map.dtype)
    locations = offsets + np.asarray(query, dtype=key_map.dtype)
    return bilinear_sample(key_map, locations)


def deformable_aggregate(
    key_map: Tensor,
    locations: Tensor,
    weights: Tensor,
    params: DeformAttnParams,
) -> Tensor:
    """
    Weighted sum of value-projected key samples, before the output projection.

    Args:
        key_map: F_b as an (H, W, C) map.
        locations: Sampling coordinates, shape (Q, N_head, N_k, 2).
        weights: Normalised attention, shape (Q, N_head, N_k).
        params: Supplies the per-head value projections.

    Returns:
        Tensor of shape (Q, C), heads concatenated along channels.
    """
    height, width, channels = key_map.shape
    queries, num_heads, num_keys, _ = locations.shape
    head_dim = params.head_dim
    flat_keys = key_map.reshape(height * width, channels)
    heads = []
    for h in range(num_heads):
        # value projection commutes with bilinear sampling, so project the map once
        values = linear_map(flat_keys[:, h * head_dim:(h + 1) * head_dim], params.value_proj[h])
        sampled = bilinear_sample(values.reshape(height, width, head_dim), locations[:, h])
        head_weights = weights[:, h].reshape(queries, num_keys, 1)
        heads.append((sampled * head_weights).sum(axis=1))
    return concat(heads, axis=-1)


def attention_weights(x: Tensor, params: DeformAttnParams) -> Tensor:
    """Softmax over the N_k logits of each (query, head), shape (H*W, N_head, N_k)."""
    height, width, channels = x.shape
    logits = linear_map(x.reshape(height * width, channels), params.attn_proj)
    return softmax(logits.reshape(height * width, params.num_heads, params.num_keys), axis=-1)


def deformable_attention(x: Tensor, params: DeformAttnParams) -> Tensor:
    """
    Deformable attention over an (H, W, C) map; cost O(H * W * C * N_k).

    Each query attends to N_k bilinearly sampled keys per head at its own position plus
    predicted offsets, weighted by a softmax over N_k logits read at the query.

    Raises:
        DimensionError: On a channel mismatch.
        NonFiniteError: If any intermediate turns NaN/Inf.
    """
    _check_map(x, params.channels)
    height, width, channels = x.shape
    queries = height * width
    offsets = predict_offsets(x, params).reshape(queries, params.num_heads, params.num_keys, 2)
    locations = offsets + _query_grid(height, width).reshape(queries, 1, 1, 2).astype(x.dtype)
    weights = attention_weights(x, params)
    keys = linear_map(x.reshape(queries, channels), params.key_proj).reshape(height, width, channels)
    aggregated = deformable_aggregate(keys, locations, weights, params)
    return linear_map(aggregated, params.out_proj).reshape(height, width, channels)


def dense_attention_weights(x: Tensor, params: DenseAttnParams) -> List[Tensor]:
    """Row-stochastic (H*W, H*W) attention matrix for each head."""
    _check_map(x, params.channels)
    height, width, channels = x.shape
    flat = x.reshape(height * width, channels)
    maps = []
    for U, V in zip(params.U, params.V):
        query, key = flat @ U, flat @ V
        maps.append(softmax((query @ key.transpose()) * (1.0 / params.rho), axis=-1))
    return maps


def dense_attention(x: Tensor, params: DenseAttnParams) -> Tensor:
    """Global dot-product attention; cost O((H*W)^2 * C). Reference implementation."""
    height, width, channels = x.shape
    flat = x.reshape(height * width, channels)
    out: Optional[Tensor] = None
    for weights, W_value, W_out in zip(dense_attention_weights(x, params), params.W_value, params.W_out):
        head = (weights @ (flat @ W_value)) @ W_out
        out = head if out is None else out + head
    return out.reshape(height, width, channels)


def attend(x: Tensor, params: AttnParams) -> Tensor:
    if isinstance(params, DenseAttnParams):
        return dense_attention(x, params)
    return deformable_attention(x, params)


def encoder_block(x: Tensor, params: EncoderBlockParams) -> Tensor:
    """y = LN(x + Attn(x)); out = LN(y + FFN(y)), normalising each position over channels."""
    _check_map(x, params.channels)
    height, width, channels = x.shape
    y = layer_norm(x + attend(x, params.attn), params.epsilon, axes=(-1,))
    hidden = relu(linear_map(y.reshape(height * width, channels), params.ffn_w1, params.ffn_b1))
    ffn = linear_map(hidden, params.ffn_w2, params.ffn_b2).reshape(height, width, channels)
    return layer_norm(y + ffn, params.epsilon, axes=(-1,))


def gte_forward(reid_features: Tensor, params: GteParams) -> Tensor:
    """
    Encode ReID-specific features (B, H', W', C) into embeddings (B, H', W', D).

    Images are processed one after another in batch order, so results are deterministic.
    """
    if reid_features.ndim != 4:
        raise DimensionError(f"gte_forward expects (B, H', W', C), got {reid_features.shape}")
    batch, height, width, channels = reid_features.shape
    embed_dim = params.head_w.shape[1]
    outputs = []
    for b in range(batch):
        x = reid_features[b]
        for block in params.blocks:
            x = encoder_block(x, block)
        emb = linear_map(x.reshape(height * width, channels), params.head_w, params.head_b)
        outputs.append(emb.reshape(1, height, width, embed_dim))
    return concat(outputs, axis=0)
