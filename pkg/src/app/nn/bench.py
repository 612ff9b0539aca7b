"""Wall-clock scaling of deformable against dense attention, the encoder, and the GCD transform."""
import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from app.nn.gcd import GcdParams, context_vector, transform
from app.nn.gte import DeformAttnParams, DenseAttnParams, GteParams, deformable_attention, dense_attention, gte_forward
from app.tensor import DEFAULT_DTYPE, Tensor

logger = logging.getLogger(__name__)


def _median_seconds(fn: Callable[[], object], repeats: int) -> float:
    fn()
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - start)
    return float(np.median(timings))


def time_attention(
    kind: str,
    size: int,
    channels: int = 32,
    num_keys: int = 9,
    num_heads: int = 4,
    repeats: int = 5,
    seed: int = 0,
    dtype: np.dtype = DEFAULT_DTYPE,
) -> float:
    """Median forward time of one attention layer on a size x size x channels map."""
    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((size, size, channels)), dtype=dtype)
    if kind == "dense":
        dense = DenseAttnParams(channels, num_heads, rng, dtype)
        return _median_seconds(lambda: dense_attention(x, dense), repeats)
    if kind != "deformable":
        raise ValueError(f"unknown attention {kind!r}")
    deform = DeformAttnParams(channels, num_heads, num_keys, rng, dtype)
    deform.offset_proj.data = 0.1 * rng.standard_normal(deform.offset_proj.shape).astype(dtype)
    return _median_seconds(lambda: deformable_attention(x, deform), repeats)


@dataclass
class ScalingRow:
    size: int
    deformable: float
    dense: float
    deformable_ratio: float = float("nan")
    dense_ratio: float = float("nan")


def attention_scaling(
    sizes: Sequence[int] = (32, 45, 64),
    channels: int = 32,
    num_keys: int = 9,
    num_heads: int = 4,
    repeats: int = 5,
    dtype: np.dtype = DEFAULT_DTYPE,
) -> List[ScalingRow]:
    """Timings per map size; ratios are against the previous size."""
    rows: List[ScalingRow] = []
    for size in sizes:
        row = ScalingRow(
            size=size,
            deformable=time_attention("deformable", size, channels, num_keys, num_heads, repeats, dtype=dtype),
            dense=time_attention("dense", size, channels, num_keys, num_heads, repeats, dtype=dtype),
        )
        if rows:
            row.deformable_ratio = row.deformable / rows[-1].deformable
            row.dense_ratio = row.dense / rows[-1].dense
        rows.append(row)
        logger.info(f"bench size {size}: deformable {row.deformable * 1e3:.2f}ms dense {row.dense * 1e3:.2f}ms")
    return rows


def key_sweep(
    num_keys: Sequence[int],
    size: int = 32,
    channels: int = 32,
    num_heads: int = 4,
    repeats: int = 5,
    dtype: np.dtype = DEFAULT_DTYPE,
) -> List[float]:
    return [time_attention("deformable", size, channels, k, num_heads, repeats, dtype=dtype) for k in num_keys]


def time_encoder(
    height: int,
    width: int,
    channels: int = 32,
    num_keys: int = 9,
    num_heads: int = 4,
    embed_dim: int = 64,
    repeats: int = 5,
    seed: int = 0,
    dtype: np.dtype = DEFAULT_DTYPE,
) -> float:
    """Median time of a full one-block ``gte_forward`` on a (1, height, width, channels) map."""
    rng = np.random.default_rng(seed)
    params = GteParams.build(channels, num_heads=num_heads, num_keys=num_keys, embed_dim=embed_dim, rng=rng, dtype=dtype)
    offsets = params.blocks[0].attn.offset_proj
    offsets.data = 0.1 * rng.standard_normal(offsets.shape).astype(dtype)
    x = Tensor(rng.standard_normal((1, height, width, channels)), dtype=dtype)
    return _median_seconds(lambda: gte_forward(x, params), repeats)


def time_gcd_transform(
    size: int,
    channels: int = 32,
    repeats: int = 200,
    seed: int = 0,
    dtype: np.dtype = DEFAULT_DTYPE,
) -> float:
    """Best-of-``repeats`` time of the post-pooling branches for a size x size map."""
    rng = np.random.default_rng(seed)
    params = GcdParams(channels, rng=rng, dtype=dtype)
    x = Tensor(rng.standard_normal((1, size, size, channels)), dtype=dtype)
    z = context_vector(x, params.W_k)
    transform(z, params)
    timings = []
    for _ in range(repeats):
        start = time.perf_counter()
        transform(z, params)
        timings.append(time.perf_counter() - start)
    return float(min(timings))
