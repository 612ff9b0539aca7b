"""
Finite-difference gradient suite over every differentiable stage.

Each case builds a fresh 64-bit problem from a seed and returns the scalar closure
and the tensors to perturb. Weighted sums with random coefficients stand in for a
plain sum wherever a layer norm would make the plain sum identically zero.
"""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from app.detect.losses import LossWeights, box_loss, heatmap_loss, reid_loss_from_logits, total_loss
from app.detect.targets import render_targets
from app.nn.gcd import GcdParams, disentangle, layer_norm
from app.nn.gte import DeformAttnParams, EncoderBlockParams, deformable_attention, encoder_block
from app.tensor import CHECK_DTYPE, Parameter, Tensor, grad_check, sigmoid

logger = logging.getLogger(__name__)

BATCH, CHANNELS, SIDE, NUM_KEYS, NUM_HEADS = 1, 8, 6, 4, 2
NUM_OBJECTS, NUM_CLASSES = 3, 4
TOLERANCE = 1e-4

Case = Tuple[Callable[[], Tensor], List[Tensor]]


def _param(rng: np.random.Generator, shape, scale: float = 1.0, name: str = "") -> Parameter:
    return Parameter(scale * rng.standard_normal(shape), name=name, dtype=CHECK_DTYPE)


def _randomize(params: Sequence[Parameter], rng: np.random.Generator, scale: float = 0.5) -> None:
    for p in params:
        p.data = scale * rng.standard_normal(p.shape)
        p.zero_grad()


def gcd_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    x = _param(rng, (BATCH, SIDE, SIDE, CHANNELS), name="x")
    params = GcdParams(CHANNELS, reduction=4, rng=rng, dtype=CHECK_DTYPE)
    _randomize(params.parameters(), rng)
    w_det = rng.standard_normal(x.shape)
    w_reid = rng.standard_normal(x.shape)

    def fn() -> Tensor:
        parts = disentangle(x, params)
        return (parts.det * w_det).sum() + (parts.reid * w_reid).sum()

    return fn, [x, *params.parameters()]


def layer_norm_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    v = _param(rng, (BATCH, SIDE, SIDE, CHANNELS), name="v")
    weights = rng.standard_normal(v.shape)
    return (lambda: (layer_norm(v) * weights).sum()), [v]


def _deform_params(rng: np.random.Generator) -> DeformAttnParams:
    params = DeformAttnParams(CHANNELS, NUM_HEADS, NUM_KEYS, rng=rng, dtype=CHECK_DTYPE)
    _randomize(params.parameters(), rng)
    return params


def deformable_attention_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    x = _param(rng, (SIDE, SIDE, CHANNELS), name="x")
    params = _deform_params(rng)
    weights = rng.standard_normal(x.shape)
    return (lambda: (deformable_attention(x, params) * weights).sum()), [x, *params.parameters()]


def encoder_block_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    x = _param(rng, (SIDE, SIDE, CHANNELS), name="x")
    block = EncoderBlockParams(_deform_params(rng), ffn_ratio=2, rng=rng, dtype=CHECK_DTYPE)
    _randomize([block.ffn_w1, block.ffn_b1, block.ffn_w2, block.ffn_b2], rng)
    weights = rng.standard_normal(x.shape)
    return (lambda: (encoder_block(x, block) * weights).sum()), [x, *block.parameters()]


def _heatmap_target(rng: np.random.Generator) -> np.ndarray:
    size = 4 * SIDE
    boxes = []
    for cx, cy in ((5.0, 6.0), (17.0, 9.0), (10.0, 19.0)):
        w, h = rng.uniform(4.0, 8.0, 2)
        boxes.append((cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2))
    return render_targets(boxes, size, size).heatmap


def heatmap_loss_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    logits = _param(rng, (SIDE, SIDE), name="logits")
    target = _heatmap_target(rng)
    return (lambda: heatmap_loss(sigmoid(logits), target)), [logits]


def box_loss_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    o = _param(rng, (NUM_OBJECTS, 2), name="o")
    s = _param(rng, (NUM_OBJECTS, 2), name="s")
    o_hat = rng.uniform(0.0, 1.0, (NUM_OBJECTS, 2))
    s_hat = rng.uniform(1.0, 4.0, (NUM_OBJECTS, 2))
    return (lambda: box_loss(o, s, o_hat, s_hat)), [o, s]


def reid_loss_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    logits = _param(rng, (NUM_OBJECTS, NUM_CLASSES), name="logits")
    labels = rng.integers(0, NUM_CLASSES, NUM_OBJECTS)
    return (lambda: reid_loss_from_logits(logits, labels, NUM_CLASSES)), [logits]


def total_loss_case(seed: int) -> Case:
    rng = np.random.default_rng(seed)
    heat_logits = _param(rng, (SIDE, SIDE), name="heat_logits")
    o = _param(rng, (NUM_OBJECTS, 2), name="o")
    s = _param(rng, (NUM_OBJECTS, 2), name="s")
    id_logits = _param(rng, (NUM_OBJECTS, NUM_CLASSES), name="id_logits")
    weights = LossWeights(CHECK_DTYPE)
    _randomize(weights.parameters(), rng)
    target = _heatmap_target(rng)
    o_hat = rng.uniform(0.0, 1.0, (NUM_OBJECTS, 2))
    s_hat = rng.uniform(1.0, 4.0, (NUM_OBJECTS, 2))
    labels = rng.integers(0, NUM_CLASSES, NUM_OBJECTS)

    def fn() -> Tensor:
        return total_loss(
            heatmap_loss(sigmoid(heat_logits), target),
            box_loss(o, s, o_hat, s_hat),
            reid_loss_from_logits(id_logits, labels, NUM_CLASSES),
            weights,
        )

    return fn, [heat_logits, o, s, id_logits, *weights.parameters()]


GRADIENT_CASES: Dict[str, Callable[[int], Case]] = {
    "gcd": gcd_case,
    "layer_norm": layer_norm_case,
    "deformable_attention": deformable_attention_case,
    "encoder_block": encoder_block_case,
    "heatmap_loss": heatmap_loss_case,
    "box_loss": box_loss_case,
    "reid_loss": reid_loss_case,
    "total_loss": total_loss_case,
}


@dataclass
class GradientResult:
    name: str
    seeds: int
    max_error: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_error <= TOLERANCE


def check_case(name: str, seed: int, max_checks: int = 48) -> float:
    fn, params = GRADIENT_CASES[name](seed)
    return grad_check(fn, params, h=1e-6, max_checks=max_checks, seed=seed)


def run_gradient_suite(seeds: int = 20, max_checks: int = 48, names: Sequence[str] = ()) -> List[GradientResult]:
    """Worst relative error per case over ``seeds`` seeds."""
    results = []
    for name in names or GRADIENT_CASES:
        start = time.perf_counter()
        worst = max(check_case(name, seed, max_checks) for seed in range(seeds))
        results.append(GradientResult(name, seeds, worst, time.perf_counter() - start))
        logger.info(f"gradcheck {name}: max rel err {worst:.2e} over {seeds} seeds")
    return results
