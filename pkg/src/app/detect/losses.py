"""Detection and ReID objectives and their uncertainty-weighted combination."""
from typing import Optional

import numpy as np

from app.nn.module import Module, zeros
from app.tensor import DEFAULT_DTYPE, DimensionError, Tensor, abs_, clamp, softmax

PROB_EPS = 1e-6


class LossWeights(Module):
    """Learnable log-variance coefficients omega_1 (detection) and omega_2 (ReID)."""

    def __init__(self, dtype: np.dtype = DEFAULT_DTYPE):
        self.omega1 = zeros((), "omega1", dtype)
        self.omega2 = zeros((), "omega2", dtype)


def _zero(dtype: np.dtype) -> Tensor:
    return Tensor(np.zeros((), dtype=dtype))


def heatmap_loss(R: Tensor, R_hat: np.ndarray, alpha: float = 2.0, beta: float = 4.0) -> Tensor:
    """
    Penalty-reduced focal loss over heatmap pixels, normalised by the object count.

    Pixels with R_hat == 1 take the focal positive term; all others take the negative
    term down-weighted by (1 - R_hat)^beta. Predictions are clamped to [1e-6, 1 - 1e-6].
    With no objects the loss is defined as 0.

    Raises:
        DimensionError: If the prediction and target shapes differ.
    """
    R_hat = np.asarray(R_hat)
    if R.shape != R_hat.shape:
        raise DimensionError(f"heatmap prediction {R.shape} vs target {R_hat.shape}")
    positive = (R_hat == 1.0).astype(R.dtype)
    num_objects = float(positive.sum())
    if num_objects == 0:
        return _zero(R.dtype)
    R = clamp(R, PROB_EPS, 1.0 - PROB_EPS)
    negative_weight = ((1.0 - R_hat) ** beta * (1.0 - positive)).astype(R.dtype)
    pos_term = ((1.0 - R) ** alpha) * R.log() * positive
    neg_term = (R ** alpha) * (1.0 - R).log() * negative_weight
    return (pos_term + neg_term).sum() * (-1.0 / num_objects)


def box_loss(o: Tensor, s: Tensor, o_hat: np.ndarray, s_hat: np.ndarray) -> Tensor:
    """Sum over objects of L1(offset residual) + L1(size residual)."""
    if o.shape != np.shape(o_hat) or s.shape != np.shape(s_hat):
        raise DimensionError(f"box predictions {o.shape}/{s.shape} vs targets {np.shape(o_hat)}/{np.shape(s_hat)}")
    if o.size == 0:
        return _zero(o.dtype)
    return abs_(o - o_hat).sum() + abs_(s - s_hat).sum()


def reid_loss(p: Tensor, q: np.ndarray) -> Tensor:
    """
    Cross-entropy -sum_j q_j log p_j averaged over objects.

    Args:
        p: Class distributions, shape (N, K), rows from a softmax.
        q: One-hot identity targets, shape (N, K).

    Raises:
        ValueError: If there are fewer than two identity classes.
    """
    if p.ndim != 2 or p.shape != np.shape(q):
        raise DimensionError(f"identity distribution {p.shape} vs targets {np.shape(q)}")
    if p.shape[1] < 2:
        raise ValueError(f"ReID classification needs at least 2 identities, got {p.shape[1]}")
    if p.shape[0] == 0:
        return _zero(p.dtype)
    log_p = clamp(p, PROB_EPS, 1.0).log()
    return (log_p * np.asarray(q, dtype=p.dtype)).sum() * (-1.0 / p.shape[0])


def one_hot(labels: np.ndarray, num_classes: int, dtype: np.dtype = DEFAULT_DTYPE) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes), dtype=dtype)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def reid_loss_from_logits(logits: Tensor, labels: np.ndarray, num_classes: Optional[int] = None) -> Tensor:
    num_classes = num_classes or logits.shape[1]
    return reid_loss(softmax(logits, axis=-1), one_hot(labels, num_classes, logits.dtype))


def total_loss(L_h: Tensor, L_b: Tensor, L_r: Tensor, weights: LossWeights) -> Tensor:
    """L = 1/2 (e^-w1 (L_h + L_b) + e^-w2 L_r + w1 + w2); both omegas receive gradients."""
    detection = L_h + L_b
    return (
        (-weights.omega1).exp() * detection
        + (-weights.omega2).exp() * L_r
        + weights.omega1
        + weights.omega2
    ) * 0.5
